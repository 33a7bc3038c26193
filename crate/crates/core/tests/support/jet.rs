//! Forward-mode jets in three variables. Nesting `Jet<Jet<f64>>` carries
//! second derivatives, `Jet<Jet<Jet<f64>>>` third.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + std::fmt::Debug
{
    fn cst(v: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn re(self) -> f64;

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn re(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Jet<T> {
    pub v: T,
    pub d: [T; 3],
}

impl<T: Scalar> Jet<T> {
    pub fn var(v: T, k: usize) -> Self {
        let mut d = [T::cst(0.0); 3];
        d[k] = T::cst(1.0);
        Jet { v, d }
    }

    fn chain(self, f: T, df: T) -> Self {
        Jet {
            v: f,
            d: self.d.map(|x| x * df),
        }
    }
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Jet {
            v: self.v + o.v,
            d: [0, 1, 2].map(|k| self.d[k] + o.d[k]),
        }
    }
}

impl<T: Scalar> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Jet {
            v: self.v - o.v,
            d: [0, 1, 2].map(|k| self.d[k] - o.d[k]),
        }
    }
}

impl<T: Scalar> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Jet {
            v: self.v * o.v,
            d: [0, 1, 2].map(|k| self.d[k] * o.v + self.v * o.d[k]),
        }
    }
}

impl<T: Scalar> Div for Jet<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        Jet {
            v: q,
            d: [0, 1, 2].map(|k| (self.d[k] - q * o.d[k]) / o.v),
        }
    }
}

impl<T: Scalar> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet {
            v: -self.v,
            d: self.d.map(|x| -x),
        }
    }
}

impl<T: Scalar> Scalar for Jet<T> {
    fn cst(v: f64) -> Self {
        Jet {
            v: T::cst(v),
            d: [T::cst(0.0); 3],
        }
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), T::cst(1.0) / self.v)
    }
    fn re(self) -> f64 {
        self.v.re()
    }
}

pub type M3<T> = [[T; 3]; 3];

pub fn det<T: Scalar>(m: &M3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inverse<T: Scalar>(m: &M3<T>) -> M3<T> {
    let d = det(m);
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    // inverse is the transposed cofactor matrix over the determinant
    let mut out = [[T::cst(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[j][i] = c(i, j) / d;
        }
    }
    out
}

pub fn matmul<T: Scalar>(a: &M3<T>, b: &M3<T>) -> M3<T> {
    let mut out = [[T::cst(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] = out[i][j] + a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn transpose<T: Scalar>(a: &M3<T>) -> M3<T> {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}
