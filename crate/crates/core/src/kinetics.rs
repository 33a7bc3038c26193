//! Species kinetics in the reference configuration: scaling functions,
//! reaction rates and transport fluxes of PDGF, TGF-β, ECM and SMC density,
//! together with their partial derivatives for Newton linearization.

use crate::error::{Error, Result};
use crate::tensor::{Mat3, Vec3};

/// Index of each argument in a [`Linearized::d`] array.
pub const P: usize = 0;
pub const T: usize = 1;
pub const E: usize = 2;
pub const S: usize = 3;
pub const J: usize = 4;

const MAX_EXPONENT: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesParams {
    pub d_p: f64,
    pub eta_p: f64,
    pub eps_p: f64,
    pub c_p_th: f64,
    pub l_p: f64,
    pub d_t: f64,
    pub eps_t: f64,
    pub c_t_th: f64,
    pub l_t: f64,
    pub eta_e: f64,
    pub eps_e: f64,
    pub c_e_eq: f64,
    pub c_e_th: f64,
    pub chi_c: f64,
    pub chi_h: f64,
    pub eta_s: f64,
    pub rho_s_eq: f64,
}

impl SpeciesParams {
    /// Unrestrained-block values.
    pub fn block() -> Self {
        SpeciesParams {
            d_p: 0.1,
            eta_p: 1e-6,
            eps_p: 1e-7,
            c_p_th: 1e-15,
            l_p: 1e16,
            d_t: 0.1,
            eps_t: 1e-7,
            c_t_th: 1e-16,
            l_t: 1e16,
            eta_e: 1e-7,
            eps_e: 1e21,
            c_e_eq: 7e-9,
            c_e_th: 7.0007e-9,
            chi_c: 1e11,
            chi_h: 1e6,
            eta_s: 1e14,
            rho_s_eq: 3.7e5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("D_P", self.d_p),
            ("eta_P", self.eta_p),
            ("eps_P", self.eps_p),
            ("c_P_th", self.c_p_th),
            ("l_P", self.l_p),
            ("D_T", self.d_t),
            ("eps_T", self.eps_t),
            ("c_T_th", self.c_t_th),
            ("l_T", self.l_t),
            ("eta_E", self.eta_e),
            ("eps_E", self.eps_e),
            ("chi_C", self.chi_c),
            ("chi_H", self.chi_h),
            ("eta_S", self.eta_s),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !(self.c_e_eq > 0.0) || !(self.rho_s_eq > 0.0) {
            return Err(Error::InvalidParameter("c_E_eq and rho_S_eq must be positive".into()));
        }
        if self.c_e_th < self.c_e_eq {
            return Err(Error::InvalidParameter(format!(
                "c_E_th ({}) must not be below c_E_eq ({})",
                self.c_e_th, self.c_e_eq
            )));
        }
        Ok(())
    }
}

/// `1 / (1 + e^x)` with the exponent clamped, and its derivative in `x`.
fn logistic(x: f64) -> (f64, f64) {
    if x.abs() >= MAX_EXPONENT {
        let f = 1.0 / (1.0 + x.clamp(-MAX_EXPONENT, MAX_EXPONENT).exp());
        return (f, 0.0);
    }
    let f = 1.0 / (1.0 + x.exp());
    (f, -f * (1.0 - f))
}

/// PDGF scaling function of a spatial concentration and its derivative.
pub fn f_p_with_slope(c_p: f64, p: &SpeciesParams) -> (f64, f64) {
    let (f, df) = logistic(-p.l_p * (c_p - p.c_p_th));
    (f, -p.l_p * df)
}

/// TGF-β scaling function of a spatial concentration and its derivative.
pub fn f_t_with_slope(c_t: f64, p: &SpeciesParams) -> (f64, f64) {
    let (f, df) = logistic(p.l_t * (c_t - p.c_t_th));
    (f, p.l_t * df)
}

pub fn f_p(c_p: f64, p: &SpeciesParams) -> f64 {
    f_p_with_slope(c_p, p).0
}

pub fn f_t(c_t: f64, p: &SpeciesParams) -> f64 {
    f_t_with_slope(c_t, p).0
}

/// Point values needed by the species equations, all in the reference configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesPointState {
    pub c_p: f64,
    pub c_t: f64,
    pub c_e: f64,
    pub rho: f64,
    pub grad_c_p: Vec3,
    pub grad_c_t: Vec3,
    pub grad_c_e: Vec3,
    pub j: f64,
    pub grad_j: Vec3,
    pub cinv: Mat3,
}

impl SpeciesPointState {
    pub fn value(&self, species: usize) -> f64 {
        match species {
            P => self.c_p,
            T => self.c_t,
            E => self.c_e,
            S => self.rho,
            _ => self.j,
        }
    }

    pub fn gradient(&self, species: usize) -> Vec3 {
        match species {
            P => self.grad_c_p,
            T => self.grad_c_t,
            E => self.grad_c_e,
            _ => panic!("no gradient stored for argument {species}"),
        }
    }
}

/// A scalar and its partial derivatives with respect to `(c_P, c_T, c_E, ρ, J)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Linearized {
    pub value: f64,
    pub d: [f64; 5],
}

pub fn pdgf_reaction(s: &SpeciesPointState, p: &SpeciesParams) -> f64 {
    pdgf_reaction_linearized(s, p).value
}

pub fn pdgf_reaction_linearized(s: &SpeciesPointState, p: &SpeciesParams) -> Linearized {
    let j = s.j;
    let (ft, dft) = f_t_with_slope(s.c_t / j, p);
    let source = p.eta_p / j * s.rho * s.c_t;
    let sink = p.eps_p / j * ft * s.rho * s.c_p;
    Linearized {
        value: source - sink,
        d: [
            -p.eps_p / j * ft * s.rho,
            p.eta_p / j * s.rho - p.eps_p / j * dft / j * s.rho * s.c_p,
            0.0,
            p.eta_p / j * s.c_t - p.eps_p / j * ft * s.c_p,
            -source / j + sink / j + p.eps_p / j * dft * s.c_t / (j * j) * s.rho * s.c_p,
        ],
    }
}

pub fn tgf_reaction(s: &SpeciesPointState, p: &SpeciesParams) -> f64 {
    tgf_reaction_linearized(s, p).value
}

pub fn tgf_reaction_linearized(s: &SpeciesPointState, p: &SpeciesParams) -> Linearized {
    let j = s.j;
    let value = -p.eps_t / j * s.rho * s.c_t;
    Linearized {
        value,
        d: [0.0, -p.eps_t / j * s.rho, 0.0, -p.eps_t / j * s.c_t, -value / j],
    }
}

pub fn ecm_reaction(s: &SpeciesPointState, p: &SpeciesParams) -> f64 {
    ecm_reaction_linearized(s, p).value
}

pub fn ecm_reaction_linearized(s: &SpeciesPointState, p: &SpeciesParams) -> Linearized {
    let j = s.j;
    let gap = 1.0 - s.c_e / (j * p.c_e_th);
    let degradation = p.eps_e / j * s.c_p * s.c_e;
    Linearized {
        value: p.eta_e * s.rho * gap - degradation,
        d: [
            -p.eps_e / j * s.c_e,
            0.0,
            -p.eta_e * s.rho / (j * p.c_e_th) - p.eps_e / j * s.c_p,
            p.eta_e * gap,
            p.eta_e * s.rho * s.c_e / (j * j * p.c_e_th) + degradation / j,
        ],
    }
}

pub fn smc_reaction(s: &SpeciesPointState, p: &SpeciesParams) -> f64 {
    smc_reaction_linearized(s, p).value
}

/// Proliferation `(η_S/J) c⁰_P ρ⁰_S (1 − c⁰_E/(J c_E,th)) f_T(c⁰_T/J)`.
pub fn smc_reaction_linearized(s: &SpeciesPointState, p: &SpeciesParams) -> Linearized {
    let j = s.j;
    let (ft, dft) = f_t_with_slope(s.c_t / j, p);
    // g = (1/J)(1 − c_E/(J c_th)) groups the volume factor with the ECM gate
    let g = (1.0 - s.c_e / (j * p.c_e_th)) / j;
    let dg_dj = -1.0 / (j * j) + 2.0 * s.c_e / (j * j * j * p.c_e_th);
    let a = p.eta_s * s.c_p * s.rho;
    Linearized {
        value: a * g * ft,
        d: [
            p.eta_s * s.rho * g * ft,
            a * g * dft / j,
            -a * ft / (j * j * p.c_e_th),
            p.eta_s * s.c_p * g * ft,
            a * (dg_dj * ft - g * dft * s.c_t / (j * j)),
        ],
    }
}

/// Flux `q = k C⁻¹ (Grad c⁰ − (c⁰/J) Grad J)` of the species `species`, with a
/// point-dependent coefficient `k`. The weak form tests it with `Grad N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxTerm {
    pub species: usize,
    pub k: Linearized,
}

impl FluxTerm {
    /// `Grad c⁰ − (c⁰/J) Grad J`
    pub fn driving_gradient(&self, s: &SpeciesPointState) -> Vec3 {
        s.gradient(self.species) - s.grad_j * (s.value(self.species) / s.j)
    }

    pub fn flux(&self, s: &SpeciesPointState) -> Vec3 {
        s.cinv * self.driving_gradient(s) * self.k.value
    }

    /// `∂q/∂(point value of argument arg)`
    pub fn d_value(&self, s: &SpeciesPointState, arg: usize) -> Vec3 {
        let w = self.driving_gradient(s);
        let mut out = s.cinv * w * self.k.d[arg];
        let c = s.value(self.species);
        if arg == self.species {
            out -= s.cinv * s.grad_j * (self.k.value / s.j);
        }
        if arg == J {
            out += s.cinv * s.grad_j * (self.k.value * c / (s.j * s.j));
        }
        out
    }

    /// `∂q/∂(Grad c⁰)` of the transported species.
    pub fn d_gradient(&self, s: &SpeciesPointState) -> Mat3 {
        s.cinv * self.k.value
    }

    /// `∂q/∂(Grad J)`
    pub fn d_grad_j(&self, s: &SpeciesPointState) -> Mat3 {
        s.cinv * (-self.k.value * s.value(self.species) / s.j)
    }
}

/// `D C⁻¹ Grad c⁰ − D (c⁰/J) C⁻¹ Grad J`
pub fn gf_diffusive_flux(c0: f64, grad_c0: &Vec3, j: f64, grad_j: &Vec3, cinv: &Mat3, d: f64) -> Vec3 {
    cinv * (grad_c0 - grad_j * (c0 / j)) * d
}

pub fn pdgf_flux_terms(p: &SpeciesParams) -> [FluxTerm; 1] {
    [FluxTerm {
        species: P,
        k: Linearized {
            value: p.d_p,
            d: [0.0; 5],
        },
    }]
}

pub fn tgf_flux_terms(p: &SpeciesParams) -> [FluxTerm; 1] {
    [FluxTerm {
        species: T,
        k: Linearized {
            value: p.d_t,
            d: [0.0; 5],
        },
    }]
}

/// Chemotactic (driven by PDGF) and haptotactic (driven by ECM) flux terms of the SMC equation.
pub fn smc_flux_terms(s: &SpeciesPointState, p: &SpeciesParams) -> [FluxTerm; 2] {
    let j = s.j;
    let gate = 1.0 - s.c_e / (j * p.c_e_th);
    let chemo = -p.chi_c / j * gate * s.rho;
    let (fp, dfp) = f_p_with_slope(s.c_p / j, p);
    let hapto = p.chi_h / j * fp * s.rho;
    [
        FluxTerm {
            species: P,
            k: Linearized {
                value: chemo,
                d: [
                    0.0,
                    0.0,
                    p.chi_c / j * s.rho / (j * p.c_e_th),
                    -p.chi_c / j * gate,
                    -p.chi_c * s.rho * (-1.0 / (j * j) + 2.0 * s.c_e / (j * j * j * p.c_e_th)),
                ],
            },
        },
        FluxTerm {
            species: E,
            k: Linearized {
                value: hapto,
                d: [
                    p.chi_h / j * s.rho * dfp / j,
                    0.0,
                    0.0,
                    p.chi_h / j * fp,
                    -hapto / j - p.chi_h / j * s.rho * dfp * s.c_p / (j * j),
                ],
            },
        },
    ]
}

/// Chemotactic and haptotactic SMC flux vectors.
pub fn smc_flux_coefficients(s: &SpeciesPointState, p: &SpeciesParams) -> (Vec3, Vec3) {
    let [chemo, hapto] = smc_flux_terms(s, p);
    (chemo.flux(s), hapto.flux(s))
}
