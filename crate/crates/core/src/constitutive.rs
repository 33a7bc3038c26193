//! Growth kinematics and the growing anisotropic hyperelastic material:
//! Neo-Hookean matrix on the elastic part of the deformation plus two
//! exponential collagen fiber families whose stiffness scales with ECM content.

use crate::error::{Error, Result};
use crate::mesh::FiberFrame;
use crate::tensor::{ddot, dyad, from_action, Mat3, Tensor4, Vec3};

/// Lower bound on the growth stretch; keeps `Ug` safely invertible.
pub const THETA_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthModel {
    /// Growth stretch along the fiber-plane normal; the grown state is stress free.
    StressFreeAnisotropic,
    /// Isotropic growth of the matrix only; fibers see the total deformation.
    IsotropicMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralParams {
    pub mu: f64,
    pub lambda: f64,
    pub k1_bar: f64,
    pub k2: f64,
    pub kappa: f64,
    pub alpha_deg: f64,
    pub c_e_eq: f64,
    pub rho_s_eq: f64,
    pub growth_model: GrowthModel,
}

impl StructuralParams {
    /// Unrestrained-block values.
    pub fn block() -> Self {
        StructuralParams {
            mu: 0.02,
            lambda: 10.0,
            k1_bar: 0.112,
            k2: 20.61,
            kappa: 0.1,
            alpha_deg: 41.0,
            c_e_eq: 7.0e-9,
            rho_s_eq: 3.7e5,
            growth_model: GrowthModel::IsotropicMatrix,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if !(self.mu > 0.0) {
            return bad("mu must be positive, got mu", self.mu);
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive, got lambda", self.lambda);
        }
        if !(self.k1_bar >= 0.0) {
            return bad("k1_bar must be non-negative, got k1_bar", self.k1_bar);
        }
        if !(self.k2 > 0.0) {
            return bad("k2 must be positive, got k2", self.k2);
        }
        if !(0.0..=1.0 / 3.0).contains(&self.kappa) {
            return bad("kappa must lie in [0, 1/3], got kappa", self.kappa);
        }
        if !(self.c_e_eq > 0.0) {
            return bad("c_E_eq must be positive, got c_E_eq", self.c_e_eq);
        }
        if !(self.rho_s_eq > 0.0) {
            return bad("rho_S_eq must be positive, got rho_S_eq", self.rho_s_eq);
        }
        if self.growth_model == GrowthModel::StressFreeAnisotropic && self.kappa > 0.0 {
            return Err(Error::InvalidParameter(format!(
                "the stress-free anisotropic growth model requires perfectly aligned fibers \
                 (kappa = 0), got kappa = {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// `H = κ I + (1 − 3κ) a0 ⊗ a0`
pub fn structural_tensor(a0: &Vec3, kappa: f64) -> Result<Mat3> {
    let norm = a0.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitFiber(norm));
    }
    Ok(Mat3::identity() * kappa + dyad(a0, a0) * (1.0 - 3.0 * kappa))
}

/// `E = H : C − 1`
pub fn fiber_strain(c: &Mat3, h: &Mat3) -> f64 {
    ddot(h, c) - 1.0
}

/// Unit normal of the plane spanned by the two fiber families.
pub fn growth_direction(a01: &Vec3, a02: &Vec3) -> Result<Vec3> {
    let n = a01.cross(a02);
    let len = n.norm();
    if len < 1e-12 * a01.norm() * a02.norm() || len == 0.0 {
        return Err(Error::ParallelFibers);
    }
    Ok(n / len)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthState {
    pub theta: f64,
    pub ug: Mat3,
    pub jg: f64,
    pub gamma: Option<Vec3>,
    /// Set when the density asked for a stretch below [`THETA_FLOOR`].
    pub clamped: bool,
    /// `dθ/dρ⁰_S`; zero while clamped.
    pub dtheta_drho: f64,
}

impl GrowthState {
    /// `Ug⁻¹` and its derivative with respect to θ.
    fn inverse_and_rate(&self) -> (Mat3, Mat3) {
        let t = self.theta;
        match self.gamma {
            Some(g) => {
                let gg = dyad(&g, &g);
                (Mat3::identity() + gg * (1.0 / t - 1.0), -gg / (t * t))
            }
            None => (Mat3::identity() / t, -Mat3::identity() / (t * t)),
        }
    }
}

/// Growth stretch and tensor implied by the reference SMC density.
///
/// `gamma` is required for the anisotropic model and ignored otherwise.
pub fn growth_from_density(rho0_s: f64, params: &StructuralParams, gamma: Option<Vec3>) -> GrowthState {
    let ratio = rho0_s / params.rho_s_eq;
    match params.growth_model {
        GrowthModel::StressFreeAnisotropic => {
            let g = gamma.expect("anisotropic growth needs a growth direction");
            let (theta, clamped) = clamp(ratio);
            GrowthState {
                theta,
                ug: Mat3::identity() + dyad(&g, &g) * (theta - 1.0),
                jg: theta,
                gamma: Some(g),
                clamped,
                dtheta_drho: if clamped { 0.0 } else { 1.0 / params.rho_s_eq },
            }
        }
        GrowthModel::IsotropicMatrix => {
            let (theta, clamped) = clamp(ratio.cbrt());
            GrowthState {
                theta,
                ug: Mat3::identity() * theta,
                jg: theta.powi(3),
                gamma: None,
                clamped,
                dtheta_drho: if clamped {
                    0.0
                } else {
                    1.0 / (3.0 * params.rho_s_eq * theta * theta)
                },
            }
        }
    }
}

fn clamp(theta: f64) -> (f64, bool) {
    if theta < THETA_FLOOR || theta.is_nan() {
        (THETA_FLOOR, true)
    } else {
        (theta, false)
    }
}

/// Per-element material orientation: structural tensors and growth direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialFrame {
    pub h: [Mat3; 2],
    pub gamma: Option<Vec3>,
}

impl MaterialFrame {
    pub fn new(fibers: &FiberFrame, params: &StructuralParams) -> Result<Self> {
        let h = [
            structural_tensor(&fibers.a1, params.kappa)?,
            structural_tensor(&fibers.a2, params.kappa)?,
        ];
        let gamma = match params.growth_model {
            GrowthModel::StressFreeAnisotropic => Some(growth_direction(&fibers.a1, &fibers.a2)?),
            GrowthModel::IsotropicMatrix => None,
        };
        Ok(MaterialFrame { h, gamma })
    }
}

/// Helmholtz free energy per unit reference volume.
pub fn free_energy(
    f: &Mat3,
    growth: &GrowthState,
    c0_e: f64,
    h: &[Mat3; 2],
    params: &StructuralParams,
) -> Result<f64> {
    let (g, _) = growth.inverse_and_rate();
    let fs = f * g;
    let js = fs.determinant();
    if !(js > 0.0) {
        return Err(Error::InvertedPoint(f.determinant()));
    }
    let cs = fs.transpose() * fs;
    let ln_js = js.ln();
    let psi_iso = 0.5 * params.mu * (cs.trace() - 3.0) - params.mu * ln_js
        + 0.25 * params.lambda * (js * js - 1.0 - 2.0 * ln_js);

    let k1 = params.k1_bar * c0_e / params.c_e_eq;
    let c = f.transpose() * f;
    let psi_ani: f64 = h
        .iter()
        .map(|hi| {
            let e = fiber_strain(&c, hi).max(0.0);
            k1 / (2.0 * params.k2) * ((params.k2 * e * e).exp() - 1.0)
        })
        .sum();
    Ok(psi_iso + psi_ani)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressTangent {
    pub p: Mat3,
    /// `∂P/∂F`, flattened as in [`crate::tensor`].
    pub a: Tensor4,
    pub dp_drho: Mat3,
    pub dp_dce: Mat3,
    pub growth: GrowthState,
}

/// Stress, material tangent and species sensitivities at a material point.
pub fn stress_and_tangent(
    f: &Mat3,
    rho0_s: f64,
    c0_e: f64,
    frame: &MaterialFrame,
    params: &StructuralParams,
) -> Result<StressTangent> {
    let growth = growth_from_density(rho0_s, params, frame.gamma);
    let (g, dg) = growth.inverse_and_rate();
    let fs = f * g;
    let js = fs.determinant();
    if !(js > 0.0) {
        return Err(Error::InvertedPoint(f.determinant()));
    }
    let fs_it = fs
        .try_inverse()
        .ok_or(Error::InvertedPoint(js))?
        .transpose();
    let beta = 0.5 * params.lambda * (js * js - 1.0) - params.mu;
    let p_star = fs * params.mu + fs_it * beta;
    // linearization of P* with respect to F*
    let dp_star = |d: &Mat3| -> Mat3 {
        d * params.mu + fs_it * (params.lambda * js * js * ddot(&fs_it, d))
            - fs_it * d.transpose() * fs_it * beta
    };

    let c = f.transpose() * f;
    let k1_unit = params.k1_bar / params.c_e_eq;
    let k1 = k1_unit * c0_e;
    let mut p_ani_unit = Mat3::zeros();
    let mut fibers = Vec::with_capacity(2);
    for hi in &frame.h {
        let e = fiber_strain(&c, hi);
        if e > 0.0 {
            let ex = (params.k2 * e * e).exp();
            let fh = f * hi;
            p_ani_unit += fh * (2.0 * e * ex);
            fibers.push((hi, fh, e * ex, (1.0 + 2.0 * params.k2 * e * e) * ex));
        }
    }

    let p = p_star * g + p_ani_unit * k1;
    let a = from_action(|d| {
        let mut out = dp_star(&(d * g)) * g;
        for (hi, fh, d1, d2) in &fibers {
            out += d * *hi * (2.0 * k1 * d1) + *fh * (4.0 * k1 * d2 * ddot(fh, d));
        }
        out
    });
    let dp_dtheta = dp_star(&(f * dg)) * g + p_star * dg;

    Ok(StressTangent {
        p,
        a,
        dp_drho: dp_dtheta * growth.dtheta_drho,
        dp_dce: p_ani_unit * k1_unit,
        growth,
    })
}
