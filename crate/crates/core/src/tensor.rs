//! Second- and fourth-order tensor helpers on top of `nalgebra` 3×3 matrices.
//!
//! Fourth-order tensors are stored as 9×9 matrices with the index pair
//! `(i, J)` flattened to `3 * i + J`, so `A[(3i+J, 3k+L)] = ∂P_iJ / ∂F_kL`.

use nalgebra::{Matrix3, SMatrix, Vector3};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;
pub type Tensor4 = SMatrix<f64, 9, 9>;

#[inline]
pub fn dyad(a: &Vec3, b: &Vec3) -> Mat3 {
    a * b.transpose()
}

/// `A : B = A_ij B_ij`
#[inline]
pub fn ddot(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

#[inline]
pub fn flat(i: usize, j: usize) -> usize {
    3 * i + j
}

/// Unit second-order tensor `e_i ⊗ e_j`.
#[inline]
pub fn unit(i: usize, j: usize) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(i, j)] = 1.0;
    m
}

/// Applies a fourth-order tensor to a second-order direction: `(A : dF)_iJ`.
pub fn contract(a: &Tensor4, d: &Mat3) -> Mat3 {
    let mut out = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let row = flat(i, j);
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    s += a[(row, flat(k, l))] * d[(k, l)];
                }
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Builds a fourth-order tensor column by column from its action on unit directions.
pub fn from_action(mut action: impl FnMut(&Mat3) -> Mat3) -> Tensor4 {
    let mut a = Tensor4::zeros();
    for k in 0..3 {
        for l in 0..3 {
            let col = action(&unit(k, l));
            for i in 0..3 {
                for j in 0..3 {
                    a[(flat(i, j), flat(k, l))] = col[(i, j)];
                }
            }
        }
    }
    a
}

pub fn is_finite(m: &Mat3) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Symmetric inverse and determinant of a 3×3 matrix, `None` if singular.
pub fn inverse_det(m: &Mat3) -> Option<(Mat3, f64)> {
    let det = m.determinant();
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    m.try_inverse().map(|inv| (inv, det))
}
