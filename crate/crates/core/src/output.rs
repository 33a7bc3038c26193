//! Monitoring records, CSV time series, VTK field dumps and neointimal thickness.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::assembly::{Model, State};
use crate::constitutive::growth_from_density;
use crate::element::qp_growth;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::solver::StepLog;

/// Monitored quantities at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRecord {
    pub t: f64,
    /// Displacement of the monitoring node.
    pub u: [f64; 3],
    /// Spatial concentrations `c⁰/J` of P, T, E and the spatial SMC density at the monitoring node.
    pub spatial: [f64; 4],
    pub jg: f64,
    pub theta: f64,
    /// Mean neointimal thickness along the thickness line (NaN without one).
    pub thickness: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
}

pub const TIMESERIES_HEADER: [&str; 13] = [
    "t",
    "u_x",
    "u_y",
    "u_z",
    "c_pdgf",
    "c_tgf",
    "c_ecm",
    "rho_smc",
    "jg",
    "theta",
    "thickness",
    "iterations",
    "wall_seconds",
];

impl OutputRecord {
    pub fn from_state(scenario: &Scenario, state: &State, log: Option<&StepLog>) -> Result<Self> {
        let model = &scenario.model;
        let n = scenario.monitor_node;
        let (jn, _) = model.nodal_j(state)?;
        let e = model.node_elements(n)[0];
        let mat = &model.materials[e];
        let growth = growth_from_density(state.species[3][n], &mat.structural, mat.frame.gamma);
        let thickness = if scenario.thickness_line.is_empty() {
            f64::NAN
        } else {
            let t = neointimal_thickness(model, state, &scenario.thickness_line);
            t.iter().sum::<f64>() / t.len() as f64
        };
        Ok(OutputRecord {
            t: state.t,
            u: [state.u[3 * n], state.u[3 * n + 1], state.u[3 * n + 2]],
            spatial: std::array::from_fn(|s| state.species[s][n] / jn[n]),
            jg: growth.jg,
            theta: growth.theta,
            thickness,
            iterations: log.map_or(0, |l| l.iterations),
            wall_seconds: log.map_or(0.0, |l| l.wall_seconds),
        })
    }

    fn fields(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.16e}");
        let mut out = vec![f(self.t)];
        out.extend(self.u.iter().map(|&v| f(v)));
        out.extend(self.spatial.iter().map(|&v| f(v)));
        out.extend([f(self.jg), f(self.theta), f(self.thickness)]);
        out.push(self.iterations.to_string());
        out.push(f(self.wall_seconds));
        out
    }
}

/// Inward radial displacement of lumen nodes.
pub fn neointimal_thickness(model: &Model, state: &State, line: &[usize]) -> Vec<f64> {
    line.iter()
        .map(|&n| {
            let x = model.mesh.nodes[n];
            let r = (x.x * x.x + x.y * x.y).sqrt();
            -(state.u[3 * n] * x.x + state.u[3 * n + 1] * x.y) / r
        })
        .collect()
}

/// CSV with a header row and one row per record, numbers with 17 significant digits.
pub fn write_timeseries(records: &[OutputRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(TIMESERIES_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record(r.fields()).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_timeseries(path: &Path) -> Result<Vec<OutputRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = csv::Reader::from_reader(file);
    let header = rd.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if header.iter().ne(TIMESERIES_HEADER) {
        return Err(Error::Format(format!("unexpected time-series header in {}", path.display())));
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(|e| Error::Format(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            row[k]
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}, column {}: {e}", i + 2, &header[k])))
        };
        out.push(OutputRecord {
            t: num(0)?,
            u: [num(1)?, num(2)?, num(3)?],
            spatial: [num(4)?, num(5)?, num(6)?, num(7)?],
            jg: num(8)?,
            theta: num(9)?,
            thickness: num(10)?,
            iterations: row[11].parse().map_err(|e| Error::Format(format!("row {}: {e}", i + 2)))?,
            wall_seconds: num(12)?,
        });
    }
    Ok(out)
}

/// VTK legacy ASCII unstructured grid on the reference mesh.
///
/// Point data: displacement, spatial concentrations and SMC density.
/// Cell data: `Jg` and `θ` averaged over the quadrature points.
pub fn write_vtk(model: &Model, state: &State, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_vtk_to(model, state, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_vtk_to(model: &Model, state: &State, w: &mut impl Write) -> std::io::Result<()> {
    let mesh = &model.mesh;
    let (nn, ne) = (mesh.num_nodes(), mesh.num_elements());
    let jn = model
        .nodal_j(state)
        .map(|(j, _)| j)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "restenosis fields t = {}", state.t)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nn} double")?;
    for x in &mesh.nodes {
        writeln!(w, "{:.16e} {:.16e} {:.16e}", x.x, x.y, x.z)?;
    }
    writeln!(w, "CELLS {ne} {}", 9 * ne)?;
    for c in &mesh.elements {
        writeln!(w, "8 {} {} {} {} {} {} {} {}", c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7])?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "12")?;
    }
    writeln!(w, "POINT_DATA {nn}")?;
    writeln!(w, "VECTORS u double")?;
    for n in 0..nn {
        writeln!(w, "{:.16e} {:.16e} {:.16e}", state.u[3 * n], state.u[3 * n + 1], state.u[3 * n + 2])?;
    }
    for (s, name) in ["c_pdgf", "c_tgf", "c_ecm", "rho_smc"].iter().enumerate() {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for n in 0..nn {
            writeln!(w, "{:.16e}", state.species[s][n] / jn[n])?;
        }
    }
    writeln!(w, "CELL_DATA {ne}")?;
    let growth: Vec<(f64, f64)> = (0..ne)
        .map(|e| {
            let rho = mesh.elements[e].map(|n| state.species[3][n]);
            let g = qp_growth(&model.geoms[e], &rho, &model.materials[e]);
            let k = g.len() as f64;
            (g.iter().map(|q| q.jg).sum::<f64>() / k, g.iter().map(|q| q.theta).sum::<f64>() / k)
        })
        .collect();
    for (name, pick) in [("jg", 0), ("theta", 1)] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for g in &growth {
            writeln!(w, "{:.16e}", if pick == 0 { g.0 } else { g.1 })?;
        }
    }
    Ok(())
}
