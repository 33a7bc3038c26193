//! Checks shared by the integration tests and the acceptance run. Each check
//! returns a [`Verdict`] with a one-line summary of what was measured.

#![allow(dead_code)]

pub mod jet;
pub mod simulation;

use std::cell::Cell;

use isr_core::constitutive::{free_energy, growth_from_density, stress_and_tangent};
use isr_core::element::{hex_residual_tangent, ElementInput, HexGeometry};
use isr_core::kinetics::{
    ecm_reaction, pdgf_flux_terms, pdgf_reaction, smc_flux_terms, smc_reaction, tgf_flux_terms,
    tgf_reaction, FluxTerm, SpeciesPointState,
};
use isr_core::tensor::{contract, unit, Mat3, Vec3};
use isr_core::{
    build_block, ElementMaterial, Field, FiberFrame, GrowthModel, MaterialFrame, Scheme, SpeciesParams,
    StructuralParams,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use jet::{Jet, Scalar};

#[derive(Debug, Clone)]
pub struct Verdict {
    pub passed: bool,
    pub summary: String,
}

impl Verdict {
    pub fn new(passed: bool, summary: impl Into<String>) -> Self {
        Verdict {
            passed,
            summary: summary.into(),
        }
    }

    pub fn and(self, other: Verdict) -> Verdict {
        Verdict::new(self.passed && other.passed, format!("{}; {}", self.summary, other.summary))
    }

    pub fn assert(&self) {
        assert!(self.passed, "{}", self.summary);
    }
}

/// Deterministic property runner so repeated runs see the same states.
pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

pub fn structural(model: GrowthModel) -> StructuralParams {
    StructuralParams {
        kappa: if model == GrowthModel::IsotropicMatrix { 0.1 } else { 0.0 },
        growth_model: model,
        ..StructuralParams::block()
    }
}

pub fn fiber_frame(alpha_deg: f64, params: &StructuralParams) -> MaterialFrame {
    let a = alpha_deg.to_radians();
    let fibers = FiberFrame {
        a1: Vec3::new(a.cos(), a.sin(), 0.0),
        a2: Vec3::new(a.cos(), -a.sin(), 0.0),
    };
    MaterialFrame::new(&fibers, params).unwrap()
}

/// Admissible material point: deformation near identity, density and ECM around equilibrium.
#[derive(Debug, Clone)]
pub struct PointCase {
    pub f: Mat3,
    pub rho_ratio: f64,
    pub ce_ratio: f64,
    pub alpha_deg: f64,
}

pub fn point_cases() -> impl Strategy<Value = PointCase> {
    (
        prop::collection::vec(-1.0..1.0f64, 9),
        0.65..1.8f64,
        0.0..1.3f64,
        10.0..80.0f64,
    )
        .prop_map(|(v, rho_ratio, ce_ratio, alpha_deg)| PointCase {
            f: Mat3::identity() + Mat3::from_row_slice(&v) * 0.15,
            rho_ratio,
            ce_ratio,
            alpha_deg,
        })
}

/// Worst errors of stress, tangent and the two species sensitivities against
/// central differences with step 1e-6 on unit-scaled inputs.
pub fn point_errors(model: GrowthModel, case: &PointCase) -> [f64; 4] {
    let p = structural(model);
    let fr = fiber_frame(case.alpha_deg, &p);
    let rho = case.rho_ratio * p.rho_s_eq;
    let ce = case.ce_ratio * p.c_e_eq;
    let h = 1e-6;
    let st = stress_and_tangent(&case.f, rho, ce, &fr, &p).unwrap();
    let growth = growth_from_density(rho, &p, fr.gamma);
    let psi = |f: &Mat3| free_energy(f, &growth, ce, &fr.h, &p).unwrap();
    let stress = |f: &Mat3, rho: f64, ce: f64| stress_and_tangent(f, rho, ce, &fr, &p).unwrap().p;

    let mut e_p: f64 = 0.0;
    let mut e_a: f64 = 0.0;
    let p_mag = st.p.amax().max(1e-12);
    let a_mag = st.a.amax();
    for k in 0..3 {
        for l in 0..3 {
            let d = unit(k, l);
            let fd = (psi(&(case.f + d * h)) - psi(&(case.f - d * h))) / (2.0 * h);
            e_p = e_p.max((fd - st.p[(k, l)]).abs() / p_mag);
            let fd_p = (stress(&(case.f + d * h), rho, ce) - stress(&(case.f - d * h), rho, ce)) / (2.0 * h);
            e_a = e_a.max((fd_p - contract(&st.a, &d)).amax() / a_mag);
        }
    }
    let hr = h * p.rho_s_eq;
    let fd_rho = (stress(&case.f, rho + hr, ce) - stress(&case.f, rho - hr, ce)) / (2.0 * hr);
    let rho_mag = (st.dp_drho.amax() * p.rho_s_eq).max(1e-9 * p_mag);
    let e_rho = (fd_rho - st.dp_drho).amax() * p.rho_s_eq / rho_mag;
    let hc = h * p.c_e_eq;
    let fd_ce = (stress(&case.f, rho, ce + hc) - stress(&case.f, rho, ce - hc)) / (2.0 * hc);
    let ce_mag = (st.dp_dce.amax() * p.c_e_eq).max(1e-9 * p_mag);
    let e_ce = (fd_ce - st.dp_dce).amax() * p.c_e_eq / ce_mag;
    [e_p, e_a, e_rho, e_ce]
}

/// Stress and its three sensitivity blocks against central differences over
/// `cases` random states per growth model.
pub fn constitutive_oracle(cases: u32) -> Verdict {
    let mut parts = Vec::new();
    let mut passed = true;
    for model in [GrowthModel::IsotropicMatrix, GrowthModel::StressFreeAnisotropic] {
        let worst = Cell::new([0.0f64; 4]);
        let count = Cell::new(0u32);
        let result = runner(cases).run(&point_cases(), |case| {
            let e = point_errors(model, &case);
            let mut w = worst.get();
            for i in 0..4 {
                w[i] = w[i].max(e[i]);
            }
            worst.set(w);
            count.set(count.get() + 1);
            prop_assert!(e.iter().all(|&x| x <= 1e-5), "errors {e:?} at {case:?}");
            Ok(())
        });
        let w = worst.get();
        passed &= result.is_ok() && count.get() >= cases;
        parts.push(format!(
            "{model:?}: {} states, max rel err P {:.1e} A {:.1e} dP/drho {:.1e} dP/dcE {:.1e}",
            count.get(),
            w[0],
            w[1],
            w[2],
            w[3]
        ));
    }
    Verdict::new(passed, parts.join("; "))
}

pub fn element_material(model: GrowthModel, alpha_deg: f64) -> ElementMaterial {
    let structural = structural(model);
    ElementMaterial {
        species: SpeciesParams::block(),
        structural,
        frame: fiber_frame(alpha_deg, &structural),
    }
}

#[derive(Debug, Clone)]
pub struct ElementCase {
    pub corners: Vec<f64>,
    pub grad_u: Vec<f64>,
    pub noise: Vec<f64>,
    pub species: Vec<f64>,
    pub species_old: Vec<f64>,
    pub jn: Vec<f64>,
    pub alpha_deg: f64,
}

pub fn element_cases() -> impl Strategy<Value = ElementCase> {
    (
        prop::collection::vec(-1.0..1.0f64, 24),
        prop::collection::vec(-1.0..1.0f64, 9),
        prop::collection::vec(-1.0..1.0f64, 24),
        prop::collection::vec(0.0..1.0f64, 32),
        prop::collection::vec(0.0..1.0f64, 32),
        prop::collection::vec(-1.0..1.0f64, 8),
        10.0..80.0f64,
    )
        .prop_map(|(corners, grad_u, noise, species, species_old, jn, alpha_deg)| ElementCase {
            corners,
            grad_u,
            noise,
            species,
            species_old,
            jn,
            alpha_deg,
        })
}

/// Physical scale of each element dof, used to unit-normalize perturbations.
pub fn element_scales(sp: &SpeciesParams) -> [f64; 56] {
    let mut s = [1.0; 56];
    let species = [sp.c_p_th, sp.c_t_th, sp.c_e_th, sp.rho_s_eq];
    for (f, v) in species.iter().enumerate() {
        for a in 0..8 {
            s[8 * f + a] = *v;
        }
    }
    s
}

pub fn element_setup(case: &ElementCase, model: GrowthModel) -> (HexGeometry, ElementInput, ElementMaterial) {
    let mesh = build_block(1.0, 1).unwrap();
    let mut coords = mesh.element_coords(0);
    for (a, c) in coords.iter_mut().enumerate() {
        *c += Vec3::new(case.corners[3 * a], case.corners[3 * a + 1], case.corners[3 * a + 2]) * 0.12;
    }
    let geom = HexGeometry::new(&coords).unwrap();
    let mat = element_material(model, case.alpha_deg);
    let sp = mat.species;
    // ranges straddle the logistic thresholds and keep ECM below saturation
    let lo = [0.0, 0.0, 0.3, 0.7];
    let hi = [3.0, 3.0, 1.0, 1.5];
    let scale = [sp.c_p_th, sp.c_t_th, sp.c_e_th, sp.rho_s_eq];
    let mut species = [[0.0; 8]; 4];
    let mut species_old = [[0.0; 8]; 4];
    for f in 0..4 {
        for a in 0..8 {
            species[f][a] = (lo[f] + (hi[f] - lo[f]) * case.species[8 * f + a]) * scale[f];
            species_old[f][a] = (lo[f] + (hi[f] - lo[f]) * case.species_old[8 * f + a]) * scale[f];
        }
    }
    let g = Mat3::from_row_slice(&case.grad_u) * 0.1;
    let mut u = [Vec3::zeros(); 8];
    for a in 0..8 {
        u[a] = g * coords[a] + Vec3::new(case.noise[3 * a], case.noise[3 * a + 1], case.noise[3 * a + 2]) * 0.02;
    }
    let jn = std::array::from_fn(|a| 1.0 + 0.15 * case.jn[a]);
    let input = ElementInput {
        species,
        species_old,
        u,
        jn,
        dt: 1.0,
    };
    (geom, input, mat)
}

/// Worst block error of the element tangent and of `∂R/∂Jn` against central
/// differences of the residual. Errors are measured per row field, relative
/// to the largest scaled tangent entry of that row field.
pub fn element_errors(case: &ElementCase, model: GrowthModel) -> (f64, f64) {
    let (geom, input, mat) = element_setup(case, model);
    let scales = element_scales(&mat.species);
    let full = hex_residual_tangent(&geom, &input, &mat, Scheme::FullyImplicit).unwrap();
    let residual = |inp: &ElementInput| hex_residual_tangent(&geom, inp, &mat, Scheme::FullyImplicit).unwrap().residual;
    let h = 1e-6;
    let row_field = |r: usize| Field::ALL.iter().position(|f| f.local_range().contains(&r)).unwrap();
    let mut row_mag = [0.0f64; 5];
    for r in 0..56 {
        for c in 0..56 {
            row_mag[row_field(r)] = row_mag[row_field(r)].max((full.tangent[(r, c)] * scales[c]).abs());
        }
        if r < 32 {
            for a in 0..8 {
                row_mag[row_field(r)] = row_mag[row_field(r)].max(full.d_jn[(r, a)].abs());
            }
        }
    }
    let mut worst_k: f64 = 0.0;
    for c in 0..56 {
        let step = h * scales[c];
        let mut plus = input;
        plus.set(c, input.get(c) + step);
        let mut minus = input;
        minus.set(c, input.get(c) - step);
        let fd = (residual(&plus) - residual(&minus)) / (2.0 * step);
        for r in 0..56 {
            let e = (fd[r] - full.tangent[(r, c)]).abs() * scales[c] / row_mag[row_field(r)];
            worst_k = worst_k.max(e);
        }
    }
    let mut worst_j: f64 = 0.0;
    for a in 0..8 {
        let mut plus = input;
        plus.jn[a] += h;
        let mut minus = input;
        minus.jn[a] -= h;
        let fd = (residual(&plus) - residual(&minus)) / (2.0 * h);
        for r in 0..32 {
            worst_j = worst_j.max((fd[r] - full.d_jn[(r, a)]).abs() / row_mag[row_field(r)]);
        }
    }
    (worst_k, worst_j)
}

/// Element stiffness blocks against central differences of the residual.
pub fn element_oracle(cases: u32) -> Verdict {
    let mut parts = Vec::new();
    let mut passed = true;
    for model in [GrowthModel::IsotropicMatrix, GrowthModel::StressFreeAnisotropic] {
        let worst = Cell::new((0.0f64, 0.0f64));
        let count = Cell::new(0u32);
        let result = runner(cases).run(&element_cases(), |case| {
            let (k, j) = element_errors(&case, model);
            let w = worst.get();
            worst.set((w.0.max(k), w.1.max(j)));
            count.set(count.get() + 1);
            prop_assert!(k <= 1e-4 && j <= 1e-4, "tangent {k:e}, dR/dJn {j:e}");
            Ok(())
        });
        passed &= result.is_ok() && count.get() >= cases;
        let w = worst.get();
        parts.push(format!(
            "{model:?}: {} elements, max rel err K {:.1e} dR/dJn {:.1e}",
            count.get(),
            w.0,
            w.1
        ));
    }
    Verdict::new(passed, parts.join("; "))
}

type J1 = Jet<f64>;
type J2 = Jet<J1>;
type J3 = Jet<J2>;

/// Smooth manufactured motion `x = φ(X)`.
fn motion<T: Scalar>(x: &[T; 3]) -> [T; 3] {
    let c = T::cst;
    [
        x[0] + x[0] * x[1] * c(0.08) + (x[2] * c(0.3)).exp() * c(0.05) - c(0.05),
        x[1] * c(1.1) + x[1] * x[2] * x[2] * c(0.06) - x[0] * c(0.04),
        x[2] * c(0.95) + x[0] * x[0] * c(0.07) + x[1] * x[2] * c(0.03),
    ]
}

/// Manufactured spatial fields `(c_P, c_T, c_E, ρ)` as functions of `x`.
fn spatial_fields<T: Scalar>(x: &[T; 3], sp: &SpeciesParams) -> [T; 4] {
    let c = T::cst;
    let bump = |a: f64, b: f64, d: f64| (x[0] * c(a) + x[1] * c(b) - x[2] * c(d)).exp();
    [
        (c(0.7) + x[0] * c(0.4) + bump(0.2, -0.3, 0.1) * c(0.3)).scale(sp.c_p_th),
        (c(0.8) + x[1] * x[2] * c(0.3) + bump(-0.1, 0.2, 0.3) * c(0.2)).scale(sp.c_t_th),
        (c(0.6) + x[0] * x[1] * c(0.1) + bump(0.1, 0.1, -0.2) * c(0.1)).scale(sp.c_e_th),
        (c(1.0) + x[2] * c(0.2) + bump(0.3, 0.0, 0.2) * c(0.1)).scale(sp.rho_s_eq),
    ]
}

fn logistic<T: Scalar>(arg: T) -> T {
    T::cst(1.0) / (T::cst(1.0) + arg.exp())
}

/// Spatial right-hand sides of the four species equations at `x`, written
/// directly from the Eulerian balance laws.
fn eulerian_rhs(x0: &Vec3, sp: &SpeciesParams) -> ([f64; 4], [Vec3; 3]) {
    let x: [J2; 3] = std::array::from_fn(|k| Jet::var(Jet::var(x0[k], k), k));
    let fields = spatial_fields(&x, sp);
    let val = |s: usize| fields[s].v;
    let grad = |s: usize| fields[s].d;
    let (cp, ct, ce, rho) = (val(0), val(1), val(2), val(3));
    let f_t = logistic(J1::cst(sp.l_t) * (ct - J1::cst(sp.c_t_th)));
    let f_p = logistic(-J1::cst(sp.l_p) * (cp - J1::cst(sp.c_p_th)));
    let gate = J1::cst(1.0) - ce / J1::cst(sp.c_e_th);
    let div = |q: [J1; 3]| q[0].d[0] + q[1].d[1] + q[2].d[2];

    let q_p = grad(0).map(|g| g.scale(sp.d_p));
    let q_t = grad(1).map(|g| g.scale(sp.d_t));
    let q_s: [J1; 3] = std::array::from_fn(|i| {
        -(gate * rho * grad(0)[i]).scale(sp.chi_c) + (f_p * rho * grad(2)[i]).scale(sp.chi_h)
    });
    let r_p = (rho * ct).scale(sp.eta_p) - (f_t * rho * cp).scale(sp.eps_p);
    let r_t = -(rho * ct).scale(sp.eps_t);
    let r_e = (rho * gate).scale(sp.eta_e) - (cp * ce).scale(sp.eps_e);
    let r_s = (cp * rho * gate * f_t).scale(sp.eta_s);
    let value = |q: [J1; 3]| Vec3::new(q[0].v, q[1].v, q[2].v);
    (
        [div(q_p) + r_p.v, div(q_t) + r_t.v, r_e.v, div(q_s) + r_s.v],
        [value(q_p), value(q_t), value(q_s)],
    )
}

/// Largest relative mismatch between the Lagrangian right-hand sides (library
/// fluxes and reactions, divergence through their linearization) and `J`
/// times the Eulerian ones, plus the same for the Piola flux transform.
pub fn eulerian_lagrangian_mismatch(x0: &Vec3) -> (f64, f64) {
    let sp = SpeciesParams::block();
    let xs: [J3; 3] = std::array::from_fn(|k| Jet::var(Jet::var(Jet::var(x0[k], k), k), k));
    let phi = motion(&xs);
    let f: jet::M3<J2> = std::array::from_fn(|i| std::array::from_fn(|k| phi[i].d[k]));
    let jac = jet::det(&f);
    let x: [J2; 3] = std::array::from_fn(|i| phi[i].v);
    let fields = spatial_fields(&x, &sp);
    let c0: [J2; 4] = fields.map(|c| jac * c);
    let cinv = jet::inverse(&jet::matmul(&jet::transpose(&f), &f));

    let m3 = |m: &jet::M3<J2>, pick: &dyn Fn(&J2) -> f64| Mat3::from_fn(|i, j| pick(&m[i][j]));
    let state = SpeciesPointState {
        c_p: c0[0].v.v,
        c_t: c0[1].v.v,
        c_e: c0[2].v.v,
        rho: c0[3].v.v,
        grad_c_p: Vec3::from(c0[0].v.d),
        grad_c_t: Vec3::from(c0[1].v.d),
        grad_c_e: Vec3::from(c0[2].v.d),
        j: jac.v.v,
        grad_j: Vec3::from(jac.v.d),
        cinv: m3(&cinv, &|e| e.v.v),
    };
    let c_mat = state.cinv.try_inverse().unwrap();
    // ∂/∂X_K of each argument `(c_P, c_T, c_E, ρ, J)`, of Grad c⁰ per species, of Grad J and of C⁻¹
    let d_arg = |arg: usize, k: usize| if arg < 4 { c0[arg].v.d[k] } else { jac.v.d[k] };
    let d_grad = |s: usize, k: usize| Vec3::from_fn(|l, _| c0[s].d[l].d[k]);
    let d_grad_j = |k: usize| Vec3::from_fn(|l, _| jac.d[l].d[k]);
    let d_cinv = |k: usize| m3(&cinv, &|e| e.v.d[k]);
    let divergence = |terms: &[FluxTerm]| -> f64 {
        let mut div = 0.0;
        for t in terms {
            let q = t.flux(&state);
            for k in 0..3 {
                let mut dq = t.d_gradient(&state) * d_grad(t.species, k)
                    + t.d_grad_j(&state) * d_grad_j(k)
                    + d_cinv(k) * c_mat * q;
                for arg in 0..5 {
                    dq += t.d_value(&state, arg) * d_arg(arg, k);
                }
                div += dq[k];
            }
        }
        div
    };
    let flux_of = |terms: &[FluxTerm]| terms.iter().map(|t| t.flux(&state)).sum::<Vec3>();
    let terms: [Vec<FluxTerm>; 4] = [
        pdgf_flux_terms(&sp).to_vec(),
        tgf_flux_terms(&sp).to_vec(),
        Vec::new(),
        smc_flux_terms(&state, &sp).to_vec(),
    ];
    let reactions = [
        pdgf_reaction(&state, &sp),
        tgf_reaction(&state, &sp),
        ecm_reaction(&state, &sp),
        smc_reaction(&state, &sp),
    ];
    let x0_spatial = Vec3::new(x[0].v.v, x[1].v.v, x[2].v.v);
    let (eul, q_eul) = eulerian_rhs(&x0_spatial, &sp);
    let j = state.j;
    let mut worst_rhs: f64 = 0.0;
    for s in 0..4 {
        let div = divergence(&terms[s]);
        let lag = div + reactions[s];
        let scale = div.abs().max(reactions[s].abs()).max((j * eul[s]).abs());
        worst_rhs = worst_rhs.max((lag - j * eul[s]).abs() / scale);
    }
    let f_val = m3(&f, &|e| e.v.v);
    let f_inv = f_val.try_inverse().unwrap();
    let mut worst_flux: f64 = 0.0;
    for (s, q) in [0, 1, 3].into_iter().zip(q_eul) {
        let expected = f_inv * q * j;
        worst_flux = worst_flux.max((flux_of(&terms[s]) - expected).norm() / expected.norm());
    }
    (worst_rhs, worst_flux)
}

/// Lagrangian and Eulerian forms agree at random points of the manufactured motion.
pub fn eulerian_lagrangian_check(points: u32) -> Verdict {
    let worst = Cell::new((0.0f64, 0.0f64));
    let count = Cell::new(0u32);
    let points_in_cube = prop::collection::vec(0.0..1.0f64, 3).prop_map(|v| Vec3::new(v[0], v[1], v[2]));
    let result = runner(points).run(&points_in_cube, |x0| {
        let (rhs, flux) = eulerian_lagrangian_mismatch(&x0);
        let w = worst.get();
        worst.set((w.0.max(rhs), w.1.max(flux)));
        count.set(count.get() + 1);
        prop_assert!(rhs <= 1e-10 && flux <= 1e-10, "rhs {rhs:e} flux {flux:e} at {x0:?}");
        Ok(())
    });
    let w = worst.get();
    Verdict::new(
        result.is_ok(),
        format!(
            "{} points, max rel mismatch: right-hand sides {:.1e}, Piola fluxes {:.1e}",
            count.get(),
            w.0,
            w.1
        ),
    )
}
