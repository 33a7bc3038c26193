//! Checks that march or assemble whole models.

use isr_core::config::GeometryConfig;
use isr_core::constitutive::stress_and_tangent;
use isr_core::linalg::{apply_dirichlet, DirectSolver, Factorization};
use isr_core::tensor::{Mat3, Vec3};
use isr_core::{
    Fixed, Layout, MaterialFrame, Model, OutputRecord, Scenario, ScenarioKind, SimulationConfig, Simulator,
    SolverSettings, SpeciesParams, State, StructuralParams, TimeScheme,
};

use super::Verdict;

pub fn block_config(divisions: usize) -> SimulationConfig {
    let mut c = SimulationConfig::defaults(ScenarioKind::Block);
    c.geometry = GeometryConfig::Block { side: 1.0, divisions };
    c
}

/// Block model with edited materials; `frozen` fixes every displacement dof.
pub fn block_model(
    divisions: usize,
    edit: impl Fn(&mut SpeciesParams, &mut StructuralParams),
    influx: bool,
    frozen: bool,
) -> Model {
    let s = Scenario::build(&block_config(divisions)).unwrap();
    let m = s.model;
    let materials = m
        .materials
        .iter()
        .enumerate()
        .map(|(e, mat)| {
            let mut mat = *mat;
            edit(&mut mat.species, &mut mat.structural);
            mat.frame =
                MaterialFrame::new(&m.mesh.fiber_frame(e, mat.structural.alpha_deg), &mat.structural).unwrap();
            mat
        })
        .collect();
    let fixed = if frozen {
        (0..m.num_nodes())
            .flat_map(|node| (0..3).map(move |component| Fixed { node, component, value: 0.0 }))
            .collect()
    } else {
        m.fixed.clone()
    };
    Model::new(m.mesh.clone(), materials, if influx { m.flux.clone() } else { None }, fixed).unwrap()
}

/// Pure transport: every source, sink and taxis coefficient set to zero.
pub fn transport_only(sp: &mut SpeciesParams) {
    sp.eta_p = 0.0;
    sp.eps_p = 0.0;
    sp.eps_t = 0.0;
    sp.eta_e = 0.0;
    sp.eps_e = 0.0;
    sp.chi_c = 0.0;
    sp.chi_h = 0.0;
    sp.eta_s = 0.0;
}

/// Runs `model` from `initial` and returns every state, the initial one first.
pub fn march(model: &Model, initial: State, settings: SolverSettings) -> Vec<State> {
    let mut sim = Simulator::new(model, settings).unwrap();
    let mut states = vec![initial.clone()];
    sim.run(initial, |s, _| {
        states.push(s.clone());
        Ok(())
    })
    .unwrap();
    states
}

/// ECM build-up from a fully degraded state under frozen mechanics and no
/// growth factors, against `c_th (1 − exp(−η_E ρ t / c_th))`.
///
/// Trajectories at Δt = 1, 1/2, 1/4 are combined by two Richardson passes
/// (backward Euler is first order) and compared at every whole day.
pub fn ecm_closed_form(eta_e: f64) -> Verdict {
    let model = block_model(1, |sp, _| sp.eta_e = eta_e, false, true);
    let sp = model.materials[0].species;
    let rho = sp.rho_s_eq;
    let t_end = 370.0;
    let daily = |dt: f64| -> Vec<f64> {
        let initial = State::initial(model.num_nodes(), 0.0, rho);
        let per_day = (1.0 / dt).round() as usize;
        march(&model, initial, SolverSettings::new(TimeScheme::Monolithic, dt, t_end))
            .iter()
            .step_by(per_day)
            .map(|s| s.species[2][0])
            .collect()
    };
    let [c1, c2, c4] = [1.0, 0.5, 0.25].map(daily);
    let exact = |t: f64| sp.c_e_th * (1.0 - (-eta_e * rho * t / sp.c_e_th).exp());
    let (mut worst, mut raw) = (0.0f64, 0.0f64);
    for day in 1..c1.len() {
        let r_coarse = 2.0 * c2[day] - c1[day];
        let r_fine = 2.0 * c4[day] - c2[day];
        let extrapolated = (4.0 * r_fine - r_coarse) / 3.0;
        let e = exact(day as f64);
        worst = worst.max((extrapolated - e).abs() / e);
        raw = raw.max((c1[day] - e).abs() / e);
    }
    let tau = sp.c_e_th / (eta_e * rho);
    Verdict::new(
        c1.len() == 371 && worst <= 1e-4,
        format!(
            "eta_E {eta_e:.2e} (relaxation time {tau:.2e} d): max rel err {worst:.2e} extrapolated, {raw:.2e} at dt = 1"
        ),
    )
}

/// Deformed state with every species gate in its transition range.
pub fn perturbed_state(model: &Model) -> State {
    let sp = model.materials[0].species;
    let mut s = model.initial_state();
    for (n, x) in model.mesh.nodes.iter().enumerate() {
        let w = (3.0 * x.x + 2.0 * x.y - x.z).sin();
        s.species[0][n] = sp.c_p_th * (1.0 + 0.3 * w);
        s.species[1][n] = sp.c_t_th * (1.0 - 0.2 * w);
        s.species[2][n] = sp.c_e_eq * (0.95 + 0.02 * w);
        s.species[3][n] = sp.rho_s_eq * (1.1 + 0.05 * x.x * x.y);
        s.u[3 * n] = 0.03 * x.y * x.z;
        s.u[3 * n + 1] = -0.02 * x.x + 0.01 * x.z * x.z;
        s.u[3 * n + 2] = 0.04 * x.x * x.y;
    }
    s
}

fn scaled_system(model: &Model, layout: Layout, state: &State, t: f64) -> isr_core::linalg::CscMatrix {
    let mut old = state.clone();
    for v in old.species.iter_mut().flatten() {
        *v *= 0.99;
    }
    let a = model.assemble(layout, state, &old, t, 1.0).unwrap();
    let scales = model.dof_scales(layout);
    let mut m = a.matrix;
    m.rescale(&scales, &scales);
    let mut rhs = a.residual;
    apply_dirichlet(&mut m, &mut rhs, &model.dirichlet(layout));
    m
}

/// Largest magnitude per (row field, column field) block of the 7-dof monolithic matrix.
pub fn block_magnitudes(model: &Model, state: &State) -> [[f64; 5]; 5] {
    let layout = Layout::Monolithic;
    let m = scaled_system(model, layout, state, 60.0);
    let field = |dof: usize| layout.component(dof).min(4);
    let mut out = [[0.0f64; 5]; 5];
    for c in 0..m.dim() {
        for &r in m.pattern.column(c) {
            let v = &mut out[field(r)][field(c)];
            *v = v.max(m.get(r, c).abs());
        }
    }
    out
}

/// Couplings that vanish identically: (row field, column field).
pub const ZERO_BLOCKS: [(&str, usize, usize); 5] = [("TP", 1, 0), ("PE", 0, 2), ("uP", 4, 0), ("uT", 4, 1), ("ET", 2, 1)];

/// Zero blocks of the monolithic matrix and symmetry of the species matrices on the 4³ block.
pub fn sparsity_and_symmetry() -> Verdict {
    let s = Scenario::build(&block_config(4)).unwrap();
    let model = &s.model;
    let deformed = perturbed_state(model);
    let blocks = block_magnitudes(model, &deformed);
    let zero_max = ZERO_BLOCKS.iter().map(|&(_, r, c)| blocks[r][c]).fold(0.0, f64::max);
    const FIELDS: [&str; 5] = ["P", "T", "E", "S", "u"];
    let extra_empty: Vec<String> = (0..5)
        .flat_map(|r| (0..5).map(move |c| (r, c)))
        .filter(|&(r, c)| !ZERO_BLOCKS.iter().any(|&(_, zr, zc)| (zr, zc) == (r, c)))
        .filter(|&(r, c)| blocks[r][c] == 0.0)
        .map(|(r, c)| format!("{}{}", FIELDS[r], FIELDS[c]))
        .collect();

    let sp = model.materials[0].species;
    let mut uniform = model.initial_state();
    uniform.species[0].fill(sp.c_p_th);
    uniform.species[1].fill(sp.c_t_th);
    let (mut asym, mut spd) = (0.0f64, true);
    let mut deformed_asym = [0.0; 4];
    for sp_index in 0..4 {
        let layout = Layout::Species(sp_index);
        let m = scaled_system(model, layout, &uniform, 60.0);
        asym = asym.max(m.relative_asymmetry());
        let b = vec![1.0; m.dim()];
        spd &= DirectSolver::new().solve(&m, &b, Factorization::Cholesky).is_ok();
        deformed_asym[sp_index] = scaled_system(model, layout, &deformed, 60.0).relative_asymmetry();
    }
    Verdict::new(
        zero_max == 0.0 && asym <= 1e-12 && spd,
        format!(
            "max |K| over TP, PE, uP, uT, ET blocks {zero_max:e}, other empty blocks [{}]; \
             species asymmetry {asym:.1e} (undeformed, uniform P and E), Cholesky ok {spd}; \
             deformed-state asymmetry [P, T, E, S] [{}]",
            extra_empty.join(", "),
            deformed_asym.map(|a| format!("{a:.1e}")).join(", ")
        ),
    )
}

/// Total content of each species under pure transport, and a 50-step equilibrium run.
pub fn conservation() -> Verdict {
    let model = block_model(3, |sp, _| transport_only(sp), false, false);
    let sp = model.materials[0].species;
    let mut initial = model.initial_state();
    for (n, x) in model.mesh.nodes.iter().enumerate() {
        let bump = |c: Vec3| (-(x - c).norm_squared() / 0.1).exp();
        initial.species[0][n] = sp.c_p_th * bump(Vec3::new(0.2, 0.3, 0.9));
        initial.species[1][n] = sp.c_t_th * bump(Vec3::new(0.8, 0.5, 0.1));
        initial.species[2][n] = sp.c_e_eq * (1.0 + 0.1 * (4.0 * x.x).sin());
    }
    let start = model.species_content(&initial);
    let mut drift = 0.0f64;
    let mut spread = 0.0f64;
    for scheme in [TimeScheme::Monolithic, TimeScheme::Staggered] {
        let states = march(&model, initial.clone(), SolverSettings::new(scheme, 1.0, 20.0));
        for s in &states {
            let content = model.species_content(s);
            for k in 0..4 {
                drift = drift.max((content[k] - start[k]).abs() / start[k]);
            }
        }
        let last = states.last().unwrap();
        spread = spread.max(1.0 - last.species[0].iter().cloned().fold(0.0, f64::max) / sp.c_p_th);
    }

    let eq_model = block_model(4, |_, _| {}, false, false);
    let eq_sp = eq_model.materials[0].species;
    let rest = State::initial(eq_model.num_nodes(), eq_sp.c_e_th, eq_sp.rho_s_eq);
    let states = march(&eq_model, rest.clone(), SolverSettings::new(TimeScheme::Monolithic, 1.0, 50.0));
    let last = states.last().unwrap();
    let mut stationary = 0.0f64;
    for k in 0..4 {
        let scale = eq_model.scales[k].max(rest.species[k].iter().cloned().fold(0.0, f64::max));
        for (a, b) in last.species[k].iter().zip(&rest.species[k]) {
            stationary = stationary.max((a - b).abs() / scale);
        }
    }
    for u in &last.u {
        stationary = stationary.max(u.abs());
    }
    Verdict::new(
        drift <= 1e-10 && spread > 0.1 && states.len() == 51 && stationary <= 1e-10,
        format!(
            "transport-only content drift {drift:.1e} over 20 steps of both schemes (peak P fell by {:.0}%); \
             equilibrium drift after 50 steps {stationary:.1e}",
            100.0 * spread
        ),
    )
}

/// Homogeneous stretches `diag(λ)` of a free block under uniform growth, from `P_ii = 0`.
pub fn homogeneous_stretches(rho: f64, c_e: f64, params: &StructuralParams, frame: &MaterialFrame) -> Vec3 {
    let stress = |l: &Vec3| {
        let f = Mat3::from_diagonal(l);
        let p = stress_and_tangent(&f, rho, c_e, frame, params).unwrap().p;
        Vec3::new(p[(0, 0)], p[(1, 1)], p[(2, 2)])
    };
    let mut l = Vec3::repeat((rho / params.rho_s_eq).cbrt());
    for _ in 0..50 {
        let r = stress(&l);
        if r.norm() < 1e-15 {
            break;
        }
        let h = 1e-7;
        let mut jac = Mat3::zeros();
        for k in 0..3 {
            let mut lp = l;
            let mut lm = l;
            lp[k] += h;
            lm[k] -= h;
            jac.set_column(k, &((stress(&lp) - stress(&lm)) / (2.0 * h)));
        }
        l -= jac.lu().solve(&r).unwrap();
    }
    l
}

/// Uniformly grown 2³ block against its homogeneous solution; returns
/// `(finite-element corner displacement, homogeneous λ − 1)`.
pub fn uniform_growth(kappa: f64, rho_ratio: f64) -> (Vec3, Vec3) {
    let model = block_model(2, |sp, st| {
        transport_only(sp);
        st.kappa = kappa;
    }, false, false);
    let sp = model.materials[0].species;
    let initial = State::initial(model.num_nodes(), sp.c_e_eq, rho_ratio * sp.rho_s_eq);
    let states = march(&model, initial, SolverSettings::new(TimeScheme::Staggered, 1.0, 1.0));
    let corner = model.mesh.nearest_node(&Vec3::new(1.0, 1.0, 1.0));
    let u = states.last().unwrap().node_u(corner);
    let mat = &model.materials[0];
    let l = homogeneous_stretches(rho_ratio * sp.rho_s_eq, sp.c_e_eq, &mat.structural, &mat.frame);
    (u, l - Vec3::repeat(1.0))
}

/// Monitor-point traces of a record series.
pub fn trace(records: &[OutputRecord], f: impl Fn(&OutputRecord) -> f64) -> Vec<f64> {
    records.iter().map(f).collect()
}

pub fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

pub fn argmin(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] < v[best] { i } else { best })
}

/// Sign changes of the second difference, ignoring curvature below `floor` times its peak.
pub fn inflections(v: &[f64], floor: f64) -> Vec<usize> {
    let d2: Vec<f64> = v.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let peak = d2.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut out = Vec::new();
    let mut last_sign = 0.0;
    for (i, &c) in d2.iter().enumerate() {
        if c.abs() <= floor * peak {
            continue;
        }
        let sign = c.signum();
        if last_sign != 0.0 && sign != last_sign {
            out.push(i + 1);
        }
        last_sign = sign;
    }
    out
}
