//! Scenario construction: mesh, materials, boundary data and monitoring nodes.

use crate::assembly::{Fixed, Model, State};
use crate::config::{ArteryGeometry, FluxConfig, GeometryConfig, ScenarioKind, SimulationConfig};
use crate::constitutive::MaterialFrame;
use crate::element::{ElementMaterial, FluxPatchParams, PiecewiseLinear};
use crate::error::{Error, Result};
use crate::mesh::{build_artery_quadrant, build_block, Facet, Mesh};
use crate::output::OutputRecord;
use crate::solver::{relative_deviation, Simulator, SolverSettings, SolverStats, StepLog};

/// Ambient concentrations `c̄ = q̄ / p_en` of both growth factors.
pub fn influx_profiles(flux: &FluxConfig) -> Result<FluxPatchParams> {
    let shape = PiecewiseLinear::new(flux.profile_times.clone(), flux.profile_shape.clone())?;
    let ambient_p = shape.scaled(flux.peak_pdgf / flux.permeability);
    Ok(FluxPatchParams {
        p_en: flux.permeability,
        ambient_t: ambient_p.scaled(flux.tgf_ratio),
        ambient_p,
    })
}

/// A ready-to-run model with its monitoring data.
#[derive(Debug)]
pub struct Scenario {
    pub config: SimulationConfig,
    pub model: Model,
    pub monitor_node: usize,
    /// Lumen nodes at the thickness line, ordered by angle; empty for the block.
    pub thickness_line: Vec<usize>,
}

/// Output of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Initial record followed by one record per step.
    pub records: Vec<OutputRecord>,
    pub final_state: State,
    pub stats: SolverStats,
    pub wall_seconds: f64,
}

impl Scenario {
    pub fn build(config: &SimulationConfig) -> Result<Self> {
        config.validate()?;
        let (mesh, fixed) = match (config.scenario, &config.geometry) {
            (ScenarioKind::Block, GeometryConfig::Block { side, divisions }) => block_mesh(*side, *divisions)?,
            (ScenarioKind::Angioplasty, GeometryConfig::Artery(g)) => angioplasty_mesh(g)?,
            (ScenarioKind::Stent, GeometryConfig::Artery(g)) => stent_mesh(g)?,
            (kind, _) => {
                return Err(Error::InvalidParameter(format!(
                    "geometry does not match scenario `{}`",
                    kind.name()
                )))
            }
        };
        let materials = (0..mesh.num_elements())
            .map(|e| {
                let m = config.material(mesh.layers[e]);
                let frame = MaterialFrame::new(&mesh.fiber_frame(e, m.structural.alpha_deg), &m.structural)?;
                Ok(ElementMaterial {
                    species: m.species,
                    structural: m.structural,
                    frame,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let monitor_node = mesh.nearest_node(&config.output.monitor);
        let thickness_line = match config.scenario {
            ScenarioKind::Block => Vec::new(),
            _ => lumen_line(&mesh, config.output.thickness_z)?,
        };
        let flux = influx_profiles(&config.flux)?;
        let model = Model::new(mesh, materials, Some(flux), fixed)?;
        Ok(Scenario {
            config: config.clone(),
            model,
            monitor_node,
            thickness_line,
        })
    }

    pub fn initial_state(&self) -> State {
        self.model.initial_state()
    }

    pub fn record(&self, state: &State, log: Option<&StepLog>) -> Result<OutputRecord> {
        OutputRecord::from_state(self, state, log)
    }

    /// Marches the configured time span, calling `on_step` after every record.
    pub fn run_with(
        &self,
        settings: SolverSettings,
        mut on_step: impl FnMut(&State, &OutputRecord) -> Result<()>,
    ) -> Result<RunOutput> {
        let start = std::time::Instant::now();
        let mut sim = Simulator::new(&self.model, settings)?;
        let initial = self.initial_state();
        let first = self.record(&initial, None)?;
        on_step(&initial, &first)?;
        let mut records = vec![first];
        let final_state = sim.run(initial, |state, log| {
            let r = self.record(state, Some(log))?;
            on_step(state, &r)?;
            records.push(r);
            Ok(())
        })?;
        Ok(RunOutput {
            records,
            final_state,
            stats: sim.stats,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn run(&self) -> Result<RunOutput> {
        self.run_with(self.config.time, |_, _| Ok(()))
    }
}

/// Time-step convergence band on the monitored Jg trajectory.
pub const ACCURACY_BAND: f64 = 0.02;

/// Why a run is judged unreliable.
#[derive(Debug, Clone, PartialEq)]
pub enum Breach {
    /// The run aborted.
    Failed(String),
    /// Steps had to be halved before they converged.
    Halved(usize),
    /// Concentrations went negative beyond round-off.
    Negative(usize),
    /// Jg deviates from the reference by more than the band, relative to its excursion.
    Inaccurate(f64),
}

/// Failure and accuracy detector for a run against a finer reference run.
pub fn detect_breach(run: &Result<RunOutput>, reference: &RunOutput, band: f64) -> Option<Breach> {
    let out = match run {
        Ok(out) => out,
        Err(e) => return Some(Breach::Failed(e.to_string())),
    };
    if out.stats.halvings > 0 {
        return Some(Breach::Halved(out.stats.halvings));
    }
    if out.stats.negativity_warnings > 0 {
        return Some(Breach::Negative(out.stats.negativity_warnings));
    }
    let jg = |o: &RunOutput| o.records.iter().map(|r| (r.t, r.jg)).collect::<Vec<_>>();
    let deviation = relative_deviation(&jg(out), &jg(reference));
    (!(deviation <= band)).then_some(Breach::Inaccurate(deviation))
}

fn fix_component(mesh: &Mesh, set: &str, component: usize, out: &mut Vec<Fixed>) -> Result<()> {
    for &node in mesh.node_set(set)? {
        out.push(Fixed {
            node,
            component,
            value: 0.0,
        });
    }
    Ok(())
}

fn dedup(mut fixed: Vec<Fixed>) -> Vec<Fixed> {
    fixed.sort_by_key(|f| (f.node, f.component));
    fixed.dedup_by_key(|f| (f.node, f.component));
    fixed
}

fn block_mesh(side: f64, divisions: usize) -> Result<(Mesh, Vec<Fixed>)> {
    let mesh = build_block(side, divisions)?;
    let mut fixed = Vec::new();
    fix_component(&mesh, "x0", 0, &mut fixed)?;
    fix_component(&mesh, "y0", 1, &mut fixed)?;
    fix_component(&mesh, "z0", 2, &mut fixed)?;
    Ok((mesh, fixed))
}

fn quadrant(g: &ArteryGeometry, window: (f64, f64)) -> Result<(Mesh, Vec<Fixed>)> {
    let mesh = build_artery_quadrant(g.length, g.r_inner, g.r_media_outer, g.r_outer, g.divisions, window)?;
    let mut fixed = Vec::new();
    fix_component(&mesh, "sym_x", 0, &mut fixed)?;
    fix_component(&mesh, "sym_y", 1, &mut fixed)?;
    fix_component(&mesh, "z0", 2, &mut fixed)?;
    fix_component(&mesh, "zl", 2, &mut fixed)?;
    Ok((mesh, fixed))
}

fn angioplasty_mesh(g: &ArteryGeometry) -> Result<(Mesh, Vec<Fixed>)> {
    let (mesh, fixed) = quadrant(g, (g.damage_start, g.damage_length))?;
    Ok((mesh, dedup(fixed)))
}

/// Quadrant with a fully fixed strut band at half length and flux on the rest of the lumen.
fn stent_mesh(g: &ArteryGeometry) -> Result<(Mesh, Vec<Fixed>)> {
    if !(g.strut_width > 0.0 && g.strut_width < g.length) {
        return Err(Error::InvalidMesh(format!("strut width must lie in (0, length), got {}", g.strut_width)));
    }
    let (mut mesh, mut fixed) = quadrant(g, (0.0, g.length))?;
    let tol = 1e-9 * g.length;
    let mid = 0.5 * g.length;
    let (lo, hi) = (mid - 0.5 * g.strut_width, mid + 0.5 * g.strut_width);

    let lumen_nodes = mesh.node_set("lumen")?.to_vec();
    let band: Vec<usize> = lumen_nodes
        .iter()
        .copied()
        .filter(|&n| mesh.nodes[n].z >= lo - tol && mesh.nodes[n].z <= hi + tol)
        .collect();
    let mid_line: Vec<usize> = lumen_nodes
        .iter()
        .copied()
        .filter(|&n| (mesh.nodes[n].z - mid).abs() <= tol)
        .collect();
    if mid_line.is_empty() {
        return Err(Error::InvalidMesh(
            "no lumen node line at half length; use an even longitudinal division count".into(),
        ));
    }
    let z_range = |f: &Facet| {
        let zs = f.nodes.map(|n| mesh.nodes[n].z);
        (zs.iter().cloned().fold(f64::INFINITY, f64::min), zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    };
    let (strut, flux): (Vec<Facet>, Vec<Facet>) = mesh.patch("lumen")?.iter().partition(|f| {
        let (zmin, zmax) = z_range(f);
        zmin < hi - tol && zmax > lo + tol
    });
    mesh.node_sets.insert("strut".into(), band.clone());
    mesh.node_sets.insert("mid_lumen".into(), mid_line);
    mesh.surface_patches.remove("damage");
    mesh.surface_patches.insert("strut".into(), strut);
    mesh.surface_patches.insert("stent_flux".into(), flux);
    mesh.flux_patch = Some("stent_flux".into());
    for &node in &band {
        for component in 0..3 {
            fixed.push(Fixed {
                node,
                component,
                value: 0.0,
            });
        }
    }
    fix_component(&mesh, "mid_lumen", 2, &mut fixed)?;
    Ok((mesh, dedup(fixed)))
}

/// Lumen nodes on the node ring closest to `z`, ordered by angle.
fn lumen_line(mesh: &Mesh, z: f64) -> Result<Vec<usize>> {
    let lumen = mesh.node_set("lumen")?;
    let best = lumen
        .iter()
        .map(|&n| (mesh.nodes[n].z - z).abs())
        .fold(f64::INFINITY, f64::min);
    let mut line: Vec<usize> = lumen
        .iter()
        .copied()
        .filter(|&n| (mesh.nodes[n].z - z).abs() <= best + 1e-12)
        .collect();
    line.sort_by(|&a, &b| {
        let ang = |n: usize| mesh.nodes[n].y.atan2(mesh.nodes[n].x);
        ang(a).total_cmp(&ang(b))
    });
    Ok(line)
}
