//! Deformation-dependent growth-factor influx through a boundary quadrilateral.
//!
//! The influx per current area is `q̄ = p_en (c̄ − c⁰/J)`; it is pulled back to
//! the reference facet with the surface deformation gradient built from the
//! in-plane tangents and the unit normal of both configurations.

use crate::error::{Error, Result};
use crate::tensor::{Mat3, Vec3};

use super::{shape_quad4, QuadRule};

/// Piecewise-linear function of time, constant beyond its end points.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidParameter(
                "profile needs equally many (at least one) times and values".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("profile times must be strictly increasing".into()));
        }
        Ok(PiecewiseLinear { times, values })
    }

    pub fn constant(v: f64) -> Self {
        PiecewiseLinear {
            times: vec![0.0],
            values: vec![v],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let s = (t - t0) / (t1 - t0);
        self.values[i] * (1.0 - s) + self.values[i + 1] * s
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PiecewiseLinear {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Permeability and ambient concentrations of the two growth factors.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxPatchParams {
    pub p_en: f64,
    pub ambient_p: PiecewiseLinear,
    pub ambient_t: PiecewiseLinear,
}

impl FluxPatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_en >= 0.0) {
            return Err(Error::InvalidParameter(format!("p_en must be non-negative, got {}", self.p_en)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacetContribution {
    pub residual: [f64; 4],
    /// `∂R/∂c⁰` at the facet nodes.
    pub k_cc: [[f64; 4]; 4],
    /// `∂R/∂u`, columns `3b + k`.
    pub k_cu: [[f64; 12]; 4],
}

struct FacetPoint {
    n: [f64; 4],
    dn: [[f64; 2]; 4],
    w: f64,
}

fn facet_points() -> Vec<FacetPoint> {
    QuadRule::quad_gauss2()
        .iter()
        .map(|(p, w)| {
            let (n, dn) = shape_quad4(p[0], p[1]);
            FacetPoint { n, dn, w }
        })
        .collect()
}

fn tangents(x: &[Vec3; 4], dn: &[[f64; 2]; 4]) -> (Vec3, Vec3) {
    let mut a = Vec3::zeros();
    let mut b = Vec3::zeros();
    for i in 0..4 {
        a += x[i] * dn[i][0];
        b += x[i] * dn[i][1];
    }
    (a, b)
}

/// Surface deformation gradient `[x_ξ, x_η, n] [X_ξ, X_η, N]⁻¹`.
pub fn surface_deformation(
    ref_tangents: (Vec3, Vec3),
    cur_tangents: (Vec3, Vec3),
) -> Option<(Mat3, Vec3, Vec3)> {
    let (big_a, big_b) = ref_tangents;
    let (a, b) = cur_tangents;
    let big_n = big_a.cross(&big_b).try_normalize(0.0)?;
    let n = a.cross(&b).try_normalize(0.0)?;
    let jm = Mat3::from_columns(&[big_a, big_b, big_n]);
    let jc = Mat3::from_columns(&[a, b, n]);
    Some((jc * jm.try_inverse()?, n, big_n))
}

/// Influx residual `−∫ N_i J q̄ (nᵀ F⁻ᵀ N) dA` of one growth factor on one facet and
/// its derivatives with respect to the facet concentrations and displacements.
pub fn flux_surface_residual_tangent(
    x_ref: &[Vec3; 4],
    u: &[Vec3; 4],
    c0: &[f64; 4],
    p_en: f64,
    c_ambient: f64,
) -> Result<FacetContribution> {
    let x_cur: [Vec3; 4] = std::array::from_fn(|i| x_ref[i] + u[i]);
    let mut out = FacetContribution {
        residual: [0.0; 4],
        k_cc: [[0.0; 4]; 4],
        k_cu: [[0.0; 12]; 4],
    };
    for fp in facet_points() {
        let (big_a, big_b) = tangents(x_ref, &fp.dn);
        let (a, b) = tangents(&x_cur, &fp.dn);
        let (fs, n, big_n) = surface_deformation((big_a, big_b), (a, b)).ok_or(Error::DegenerateFacet(0))?;
        let da_ref = big_a.cross(&big_b).norm();
        let js = fs.determinant();
        let fs_it = fs.try_inverse().ok_or(Error::DegenerateFacet(0))?.transpose();
        let c: f64 = (0..4).map(|i| fp.n[i] * c0[i]).sum();
        let qbar = p_en * (c_ambient - c / js);
        let integrand = js * qbar * n.dot(&(fs_it * big_n)) * da_ref * fp.w;
        for i in 0..4 {
            out.residual[i] -= fp.n[i] * integrand;
        }

        // Since nᵀF⁻ᵀN = 1 and J dA = da, the integrand equals p_en (c̄ |a×b| − c |A×B|).
        let d_area_a = b.cross(&n);
        let d_area_b = n.cross(&a);
        for i in 0..4 {
            for j in 0..4 {
                out.k_cc[i][j] += fp.n[i] * p_en * fp.n[j] * da_ref * fp.w;
                let d_ab = d_area_a * fp.dn[j][0] + d_area_b * fp.dn[j][1];
                for k in 0..3 {
                    out.k_cu[i][3 * j + k] -= fp.n[i] * p_en * c_ambient * d_ab[k] * fp.w;
                }
            }
        }
    }
    Ok(out)
}
