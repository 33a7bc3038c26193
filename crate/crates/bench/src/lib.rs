//! Shared fixtures for the benchmarks.

use isr_core::config::GeometryConfig;
use isr_core::element::{ElementInput, HexGeometry};
use isr_core::{ElementMaterial, Scenario, ScenarioKind, SimulationConfig, Simulator, SolverSettings, State, TimeScheme};

/// Default block scenario on a `divisions`³ mesh.
pub fn block(divisions: usize) -> Scenario {
    let mut c = SimulationConfig::defaults(ScenarioKind::Block);
    c.geometry = GeometryConfig::Block { side: 1.0, divisions };
    Scenario::build(&c).expect("block scenario")
}

/// State after `days` of monolithic steps at Δt = 1, when growth factors have entered the block.
pub fn grown(scenario: &Scenario, days: f64) -> State {
    let mut sim = Simulator::new(&scenario.model, SolverSettings::new(TimeScheme::Monolithic, 1.0, days))
        .expect("settings");
    sim.run(scenario.initial_state(), |_, _| Ok(())).expect("run")
}

/// Corner element of a grown block: geometry, element input for a unit step, material.
pub fn corner_element(scenario: &Scenario, state: &State) -> (HexGeometry, ElementInput, ElementMaterial) {
    let model = &scenario.model;
    let (jn, _) = model.nodal_j(state).expect("nodal J");
    let e = model.mesh.num_elements() - 1;
    (model.geoms[e].clone(), model.element_input(e, state, state, &jn, 1.0), model.materials[e])
}
