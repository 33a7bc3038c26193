use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isr_core::output::{write_timeseries, write_vtk};
use isr_core::sweep::{sweep, write_sweep};
use isr_core::{Error, Scenario, Setting, SimulationConfig, TimeScheme};

/// Restenosis growth simulations on blocks and artery quadrants.
#[derive(Parser)]
#[command(name = "isr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its time series (and optional VTK fields).
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run once per value of a parameter and write the trajectories side by side.
    Sweep {
        config: PathBuf,
        /// `[section.]key`, e.g. `kappa` or `time.dt`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, units allowed (`"0.5 day"`).
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write the generated mesh and initial fields as VTK without running.
    MeshDump {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Time step in days.
    #[arg(long)]
    dt: Option<f64>,
    /// End time in days.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<TimeScheme>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> Result<TimeScheme, String> {
    TimeScheme::parse(s).ok_or_else(|| format!("unknown scheme `{s}` (monolithic or staggered)"))
}

fn load(path: &Path, o: &Overrides) -> Result<SimulationConfig, Error> {
    let mut cfg = SimulationConfig::from_file(path)?;
    if let Some(dt) = o.dt {
        cfg.set_path("time.dt", &Setting::Number(dt, None))?;
    }
    if let Some(t) = o.t_end {
        cfg.set_path("time.t_end", &Setting::Number(t, None))?;
    }
    if let Some(s) = o.scheme {
        cfg.time.scheme = s;
    }
    if let Some(out) = &o.out {
        cfg.output.directory = out.clone();
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(config: &Path, o: &Overrides) -> Result<(), Error> {
    let cfg = load(config, o)?;
    let dir = cfg.output.directory.clone();
    create_dir(&dir)?;
    let scenario = Scenario::build(&cfg)?;
    log::info!(
        "{}: {} nodes, {} elements, {} scheme, dt = {} d, t_end = {} d",
        cfg.scenario.name(),
        scenario.model.num_nodes(),
        scenario.model.mesh.num_elements(),
        cfg.time.scheme.name(),
        cfg.time.dt,
        cfg.time.t_end
    );
    let interval = cfg.output.field_interval;
    let mut step = 0usize;
    let out = scenario.run_with(cfg.time, |state, rec| {
        if interval > 0 && step.is_multiple_of(interval) {
            write_vtk(&scenario.model, state, &dir.join(format!("fields_{step:05}.vtk")))?;
        }
        step += 1;
        log::info!("t = {:8.3} d  Jg = {:.6}  u_z = {:.6e}  iterations {}", rec.t, rec.jg, rec.u[2], rec.iterations);
        Ok(())
    })?;
    let csv = dir.join("timeseries.csv");
    write_timeseries(&out.records, &csv)?;
    println!(
        "{} steps, {} Newton iterations, {} factorizations, {:.2} s; wrote {}",
        out.stats.steps,
        out.stats.iterations,
        out.stats.factorizations,
        out.wall_seconds,
        csv.display()
    );
    Ok(())
}

fn run_sweep(config: &Path, param: &str, values: &[String], o: &Overrides) -> Result<(), Error> {
    let cfg = load(config, o)?;
    create_dir(&cfg.output.directory)?;
    let runs = sweep(&cfg, param, values)?;
    let path = cfg.output.directory.join("sweep.csv");
    write_sweep(&runs, param, &path)?;
    for r in &runs {
        let last = r.output.records.last().expect("initial record");
        println!("{param} = {}: Jg(t_end) = {:.6}, u_z(t_end) = {:.6e}", r.label, last.jg, last.u[2]);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn mesh_dump(config: &Path, o: &Overrides) -> Result<(), Error> {
    let cfg = load(config, o)?;
    create_dir(&cfg.output.directory)?;
    let scenario = Scenario::build(&cfg)?;
    let path = cfg.output.directory.join("mesh.vtk");
    write_vtk(&scenario.model, &scenario.initial_state(), &path)?;
    let mesh = &scenario.model.mesh;
    println!(
        "{} nodes, {} elements, {} flux facets, {} fixed dofs; wrote {}",
        mesh.num_nodes(),
        mesh.num_elements(),
        scenario.model.flux_facets.len(),
        scenario.model.fixed.len(),
        path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, overrides } => run(config, overrides),
        Command::Sweep {
            config,
            param,
            values,
            overrides,
        } => run_sweep(config, param, values, overrides),
        Command::MeshDump { config, overrides } => mesh_dump(config, overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error ({category:?}): {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
