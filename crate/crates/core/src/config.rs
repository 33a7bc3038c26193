//! Simulation configuration: TOML text with unit-checked quantities.
//!
//! Numbers may be bare (canonical units) or strings of the form
//! `"<value> <unit>"`; a unit that differs from the key's canonical unit is
//! rejected. Omitted keys take the scenario defaults.

use std::path::PathBuf;

use toml::de::{DeTable, DeValue};
use toml::Spanned;

use crate::constitutive::{GrowthModel, StructuralParams};
use crate::error::{Error, Result};
use crate::kinetics::SpeciesParams;
use crate::mesh::{Layer, QuadrantDivisions};
use crate::solver::{SolverSettings, TimeScheme};
use crate::tensor::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Unit cube with a flux interface on its top face.
    Block,
    /// Artery quadrant with a denuded lumen window.
    Angioplasty,
    /// Artery quadrant with a fixed strut band and flux on the remaining lumen.
    Stent,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Block => "block",
            ScenarioKind::Angioplasty => "angioplasty",
            ScenarioKind::Stent => "stent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "block" => Some(ScenarioKind::Block),
            "angioplasty" => Some(ScenarioKind::Angioplasty),
            "stent" => Some(ScenarioKind::Stent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArteryGeometry {
    pub length: f64,
    pub r_inner: f64,
    pub r_media_outer: f64,
    pub r_outer: f64,
    pub divisions: QuadrantDivisions,
    pub damage_start: f64,
    pub damage_length: f64,
    /// Width of the strut band centred at half length (stent only).
    pub strut_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryConfig {
    Block { side: f64, divisions: usize },
    Artery(ArteryGeometry),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub species: SpeciesParams,
    pub structural: StructuralParams,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        self.species.validate()?;
        self.structural.validate()
    }
}

/// Influx at the flux interface, `q̄_P(t) = peak · shape(t)` and `q̄_T = ratio · q̄_P`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxConfig {
    /// Endothelial permeability `p_en` (mm/day).
    pub permeability: f64,
    pub peak_pdgf: f64,
    pub tgf_ratio: f64,
    pub profile_times: Vec<f64>,
    pub profile_shape: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Monitoring point; the nearest node is used.
    pub monitor: Vec3,
    /// Write a VTK field file every this many steps; 0 disables field output.
    pub field_interval: usize,
    /// Axial position of the lumen line used for neointimal thickness.
    pub thickness_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub scenario: ScenarioKind,
    pub geometry: GeometryConfig,
    pub homogeneous: Material,
    pub media: Material,
    pub adventitia: Material,
    pub flux: FluxConfig,
    pub time: SolverSettings,
    pub output: OutputConfig,
}

/// A scalar, list or text value together with its optional unit.
#[derive(Debug, Clone, PartialEq)]
pub enum Setting {
    Number(f64, Option<String>),
    Integer(i64),
    List(Vec<f64>),
    Text(String),
}

impl Setting {
    /// Parses a command-line value: a number with optional unit, a comma-separated list, or text.
    pub fn from_cli(text: &str) -> Setting {
        let t = text.trim();
        if let Ok(i) = t.parse::<i64>() {
            return Setting::Integer(i);
        }
        if let Some((v, unit)) = split_quantity(t) {
            return Setting::Number(v, unit);
        }
        if t.contains(',') {
            if let Ok(list) = t.split(',').map(|s| s.trim().parse::<f64>()).collect() {
                return Setting::List(list);
            }
        }
        Setting::Text(t.to_string())
    }

    fn number(&self, unit: &str) -> std::result::Result<f64, String> {
        match self {
            Setting::Integer(i) => Ok(*i as f64),
            Setting::Number(v, None) => Ok(*v),
            Setting::Number(v, Some(u)) => {
                if normalize_unit(u) == normalize_unit(unit) {
                    Ok(*v)
                } else {
                    Err(format!("unit `{u}` does not match the expected unit `{unit}`"))
                }
            }
            other => Err(format!("expected a number in {unit}, got {}", other.describe())),
        }
    }

    fn count(&self) -> std::result::Result<usize, String> {
        match self {
            Setting::Integer(i) if *i >= 0 => Ok(*i as usize),
            other => Err(format!("expected a non-negative integer, got {}", other.describe())),
        }
    }

    fn list(&self) -> std::result::Result<Vec<f64>, String> {
        match self {
            Setting::List(v) => Ok(v.clone()),
            other => Err(format!("expected a list of numbers, got {}", other.describe())),
        }
    }

    fn text(&self) -> std::result::Result<&str, String> {
        match self {
            Setting::Text(s) => Ok(s),
            other => Err(format!("expected a string, got {}", other.describe())),
        }
    }

    fn describe(&self) -> String {
        match self {
            Setting::Number(v, None) => format!("number {v}"),
            Setting::Number(v, Some(u)) => format!("quantity {v} {u}"),
            Setting::Integer(i) => format!("integer {i}"),
            Setting::List(_) => "a list".into(),
            Setting::Text(s) => format!("text `{s}`"),
        }
    }
}

/// `"0.1 mm^2/day"` → `(0.1, Some("mm^2/day"))`; a bare number has no unit.
fn split_quantity(text: &str) -> Option<(f64, Option<String>)> {
    let t = text.trim();
    match t.split_once(char::is_whitespace) {
        Some((v, unit)) => Some((v.parse().ok()?, Some(unit.trim().to_string()))),
        None => t.parse().ok().map(|v| (v, None)),
    }
}

/// Canonical spelling of a unit: `mm2/days` and `mm^2 / day` compare equal.
fn normalize_unit(unit: &str) -> Vec<String> {
    unit.split('/')
        .map(|tok| {
            let t: String = tok.chars().filter(|c| !c.is_whitespace() && *c != '^').collect::<String>().to_lowercase();
            match t.as_str() {
                "d" | "days" => "day".to_string(),
                "cells" => "cell".to_string(),
                "degree" | "degrees" | "°" => "deg".to_string(),
                "1" | "" => "-".to_string(),
                _ => t,
            }
        })
        .collect()
}

const SECTIONS: [&str; 7] = ["geometry", "material", "media", "adventitia", "flux", "time", "output"];

const MM: &str = "mm";
const DAY: &str = "day";
const NONE: &str = "-";

impl SimulationConfig {
    /// Defaults of a scenario.
    pub fn defaults(scenario: ScenarioKind) -> Self {
        let block = Material {
            species: SpeciesParams::block(),
            structural: StructuralParams::block(),
        };
        let media = Material {
            species: SpeciesParams {
                d_p: 0.01,
                eps_e: 3e23,
                eta_s: 1e13,
                ..SpeciesParams::block()
            },
            structural: StructuralParams {
                kappa: 0.24,
                ..StructuralParams::block()
            },
        };
        let adventitia = Material {
            species: SpeciesParams {
                d_p: 0.005,
                eps_e: 3e23,
                chi_c: 0.0,
                chi_h: 0.0,
                eta_s: 0.0,
                ..SpeciesParams::block()
            },
            structural: StructuralParams {
                mu: 0.008,
                k1_bar: 0.362,
                k2: 7.089,
                kappa: 0.17,
                alpha_deg: 50.1,
                ..StructuralParams::block()
            },
        };
        let aligned = |m: Material| Material {
            structural: StructuralParams {
                kappa: 0.0,
                growth_model: GrowthModel::StressFreeAnisotropic,
                ..m.structural
            },
            ..m
        };
        let flux = FluxConfig {
            permeability: 1e-3,
            peak_pdgf: 1e-19,
            tgf_ratio: 10.0,
            profile_times: vec![0.0, 30.0, 100.0, 370.0],
            profile_shape: vec![0.0, 1.0, 1.0, 0.0],
        };
        let time = SolverSettings::new(TimeScheme::Monolithic, 1.0, 370.0);
        let artery = |length: f64, div: QuadrantDivisions| ArteryGeometry {
            length,
            r_inner: 1.55,
            r_media_outer: 1.89,
            r_outer: 2.21,
            divisions: div,
            damage_start: 2.0,
            damage_length: 3.0,
            strut_width: 0.1,
        };
        match scenario {
            ScenarioKind::Block => SimulationConfig {
                scenario,
                geometry: GeometryConfig::Block { side: 1.0, divisions: 4 },
                homogeneous: block,
                media,
                adventitia,
                flux,
                time,
                output: OutputConfig {
                    directory: PathBuf::from("out"),
                    monitor: Vec3::new(1.0, 1.0, 1.0),
                    field_interval: 0,
                    thickness_z: 0.0,
                },
            },
            ScenarioKind::Angioplasty => SimulationConfig {
                scenario,
                geometry: GeometryConfig::Artery(artery(
                    6.0,
                    QuadrantDivisions {
                        media_radial: 3,
                        adventitia_radial: 3,
                        circumferential: 20,
                        longitudinal: 36,
                    },
                )),
                homogeneous: media,
                media,
                adventitia,
                flux,
                time,
                output: OutputConfig {
                    directory: PathBuf::from("out"),
                    monitor: lumen_point(1.55, 3.5),
                    field_interval: 0,
                    thickness_z: 3.5,
                },
            },
            ScenarioKind::Stent => SimulationConfig {
                scenario,
                geometry: GeometryConfig::Artery(artery(
                    3.0,
                    QuadrantDivisions {
                        media_radial: 5,
                        adventitia_radial: 5,
                        circumferential: 30,
                        longitudinal: 60,
                    },
                )),
                homogeneous: aligned(media),
                media: aligned(media),
                adventitia: aligned(adventitia),
                flux,
                time,
                output: OutputConfig {
                    directory: PathBuf::from("out"),
                    monitor: lumen_point(1.55, 1.2),
                    field_interval: 0,
                    thickness_z: 1.2,
                },
            },
        }
    }

    pub fn material(&self, layer: Layer) -> &Material {
        match layer {
            Layer::Homogeneous => &self.homogeneous,
            Layer::Media => &self.media,
            Layer::Adventitia => &self.adventitia,
        }
    }

    /// Parses configuration text; errors carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let line_of = |pos: usize| text[..pos.min(text.len())].matches('\n').count() + 1;
        let doc = DeTable::parse(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_of(s.start));
            Error::config(line, e.message().to_string())
        })?;
        let doc = doc.get_ref();

        let mut scenario = None;
        for (key, value) in doc.iter() {
            let name = key.get_ref().as_ref();
            if name == "scenario" {
                let s = value.get_ref().as_str().ok_or_else(|| {
                    Error::config(line_of(value.span().start), "scenario must be a string")
                })?;
                scenario = Some(ScenarioKind::parse(s).ok_or_else(|| {
                    Error::config(
                        line_of(value.span().start),
                        format!("unknown scenario `{s}` (expected block, angioplasty or stent)"),
                    )
                })?);
            } else if !SECTIONS.contains(&name) {
                return Err(Error::config(
                    line_of(key.span().start),
                    format!("unknown section or key `{name}`"),
                ));
            }
        }
        let scenario = scenario.ok_or_else(|| Error::config(1, "missing `scenario = \"...\"`"))?;
        let mut cfg = SimulationConfig::defaults(scenario);

        // fixed order so that layer sections refine the shared [material] section
        for section in SECTIONS {
            let Some((skey, sval)) = doc.iter().find(|(k, _)| k.get_ref().as_ref() == section) else {
                continue;
            };
            let table = sval.get_ref().as_table().ok_or_else(|| {
                Error::config(line_of(skey.span().start), format!("`{section}` must be a table"))
            })?;
            for (key, value) in table.iter() {
                let line = line_of(key.span().start);
                let setting = to_setting(value).map_err(|m| Error::config(line_of(value.span().start), m))?;
                cfg.set(section, key.get_ref().as_ref(), &setting)
                    .map_err(|m| Error::config(line, format!("[{section}] {}: {m}", key.get_ref())))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SimulationConfig::parse(&text)
    }

    /// Applies `[section.]key = value`; the section defaults to `material`.
    pub fn set_path(&mut self, path: &str, value: &Setting) -> Result<()> {
        let (section, key) = path.split_once('.').unwrap_or(("material", path));
        self.set(section, key, value)
            .map_err(|m| Error::InvalidParameter(format!("{section}.{key}: {m}")))?;
        self.validate()
    }

    fn set(&mut self, section: &str, key: &str, v: &Setting) -> std::result::Result<(), String> {
        match section {
            "geometry" => self.set_geometry(key, v),
            "material" => {
                for m in [&mut self.homogeneous, &mut self.media, &mut self.adventitia] {
                    set_material(m, key, v)?;
                }
                Ok(())
            }
            "media" | "adventitia" => {
                if self.scenario == ScenarioKind::Block {
                    return Err("layer sections only apply to artery scenarios".into());
                }
                if section == "media" {
                    set_material(&mut self.media, key, v)?;
                    set_material(&mut self.homogeneous, key, v)
                } else {
                    set_material(&mut self.adventitia, key, v)
                }
            }
            "flux" => {
                let f = &mut self.flux;
                match key {
                    "permeability" => f.permeability = v.number("mm/day")?,
                    "peak_pdgf" => f.peak_pdgf = v.number("mol/mm^2/day")?,
                    "tgf_ratio" => f.tgf_ratio = v.number(NONE)?,
                    "profile_times" => f.profile_times = v.list()?,
                    "profile_shape" => f.profile_shape = v.list()?,
                    _ => return Err("unknown key".into()),
                }
                Ok(())
            }
            "time" => {
                let t = &mut self.time;
                match key {
                    "dt" => t.dt = v.number(DAY)?,
                    "t_end" => t.t_end = v.number(DAY)?,
                    "scheme" => {
                        t.scheme = TimeScheme::parse(v.text()?)
                            .ok_or("expected `monolithic` or `staggered`")?
                    }
                    "tol_abs" => t.newton.tol_abs = v.number(NONE)?,
                    "tol_rel" => t.newton.tol_rel = v.number(NONE)?,
                    "tol_increment" => t.newton.tol_increment = v.number(NONE)?,
                    "max_iterations" => t.newton.max_iterations = v.count()?,
                    "max_halvings" => t.max_halvings = v.count()?,
                    _ => return Err("unknown key".into()),
                }
                Ok(())
            }
            "output" => {
                let o = &mut self.output;
                match key {
                    "directory" => o.directory = PathBuf::from(v.text()?),
                    "monitor" => {
                        let p = v.list()?;
                        if p.len() != 3 {
                            return Err(format!("expected 3 coordinates, got {}", p.len()));
                        }
                        o.monitor = Vec3::new(p[0], p[1], p[2]);
                    }
                    "field_interval" => o.field_interval = v.count()?,
                    "thickness_z" => o.thickness_z = v.number(MM)?,
                    _ => return Err("unknown key".into()),
                }
                Ok(())
            }
            _ => Err(format!("unknown section `{section}`")),
        }
    }

    fn set_geometry(&mut self, key: &str, v: &Setting) -> std::result::Result<(), String> {
        match &mut self.geometry {
            GeometryConfig::Block { side, divisions } => match key {
                "side" => *side = v.number(MM)?,
                "divisions" => *divisions = v.count()?,
                _ => return Err("unknown key for the block geometry".into()),
            },
            GeometryConfig::Artery(g) => match key {
                "length" => g.length = v.number(MM)?,
                "r_inner" => g.r_inner = v.number(MM)?,
                "r_media_outer" => g.r_media_outer = v.number(MM)?,
                "r_outer" => g.r_outer = v.number(MM)?,
                "media_radial" => g.divisions.media_radial = v.count()?,
                "adventitia_radial" => g.divisions.adventitia_radial = v.count()?,
                "circumferential" => g.divisions.circumferential = v.count()?,
                "longitudinal" => g.divisions.longitudinal = v.count()?,
                "damage_start" => g.damage_start = v.number(MM)?,
                "damage_length" => g.damage_length = v.number(MM)?,
                "strut_width" => g.strut_width = v.number(MM)?,
                _ => return Err("unknown key for the artery geometry".into()),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let layers: &[&Material] = match self.scenario {
            ScenarioKind::Block => &[&self.homogeneous],
            _ => &[&self.media, &self.adventitia],
        };
        for m in layers {
            m.validate()?;
        }
        let f = &self.flux;
        if f.profile_times.len() != f.profile_shape.len() || f.profile_times.is_empty() {
            return Err(Error::InvalidParameter(
                "profile_times and profile_shape need equal, non-zero lengths".into(),
            ));
        }
        if !(f.permeability > 0.0) {
            return Err(Error::InvalidParameter(format!("permeability must be positive, got {}", f.permeability)));
        }
        if !(f.tgf_ratio >= 0.0 && f.peak_pdgf >= 0.0) {
            return Err(Error::InvalidParameter("influx peak and ratio must be non-negative".into()));
        }
        self.time.validate()?;
        if !(self.time.newton.tol_abs > 0.0 && self.time.newton.tol_rel > 0.0) {
            return Err(Error::InvalidParameter("Newton tolerances must be positive".into()));
        }
        Ok(())
    }
}

fn lumen_point(r: f64, z: f64) -> Vec3 {
    let c = std::f64::consts::FRAC_1_SQRT_2 * r;
    Vec3::new(c, c, z)
}

fn set_material(m: &mut Material, key: &str, v: &Setting) -> std::result::Result<(), String> {
    let s = &mut m.species;
    let st = &mut m.structural;
    match key {
        "d_p" => s.d_p = v.number("mm^2/day")?,
        "d_t" => s.d_t = v.number("mm^2/day")?,
        "eta_p" => s.eta_p = v.number("mm^3/cell/day")?,
        "eps_p" => s.eps_p = v.number("mm^3/cell/day")?,
        "eps_t" => s.eps_t = v.number("mm^3/cell/day")?,
        "c_p_th" => s.c_p_th = v.number("mol/mm^3")?,
        "c_t_th" => s.c_t_th = v.number("mol/mm^3")?,
        "l_p" => s.l_p = v.number("mm^3/mol")?,
        "l_t" => s.l_t = v.number("mm^3/mol")?,
        "eta_e" => s.eta_e = v.number("mol/cell/day")?,
        "eps_e" => s.eps_e = v.number("mm^3/mol/day")?,
        "c_e_eq" => {
            s.c_e_eq = v.number("mol/mm^3")?;
            st.c_e_eq = s.c_e_eq;
        }
        "c_e_th" => s.c_e_th = v.number("mol/mm^3")?,
        "chi_c" => s.chi_c = v.number("mm^5/mol/day")?,
        "chi_h" => s.chi_h = v.number("mm^5/mol/day")?,
        "eta_s" => s.eta_s = v.number("mm^3/cell/day")?,
        "rho_s_eq" => {
            s.rho_s_eq = v.number("cells/mm^3")?;
            st.rho_s_eq = s.rho_s_eq;
        }
        "mu" => st.mu = v.number("MPa")?,
        "lambda" => st.lambda = v.number("MPa")?,
        "k1" => st.k1_bar = v.number("MPa")?,
        "k2" => st.k2 = v.number(NONE)?,
        "kappa" => st.kappa = v.number(NONE)?,
        "alpha" => st.alpha_deg = v.number("deg")?,
        "growth_model" => {
            st.growth_model = match v.text()? {
                "isotropic" => GrowthModel::IsotropicMatrix,
                "anisotropic" => GrowthModel::StressFreeAnisotropic,
                other => return Err(format!("unknown growth model `{other}` (expected isotropic or anisotropic)")),
            }
        }
        _ => return Err("unknown key".into()),
    }
    Ok(())
}

fn to_setting(value: &Spanned<DeValue<'_>>) -> std::result::Result<Setting, String> {
    let scalar = |v: &DeValue<'_>| -> std::result::Result<f64, String> {
        match v {
            DeValue::Integer(i) => parse_integer(i.as_str(), i.radix()).map(|i| i as f64),
            DeValue::Float(f) => parse_float(f.as_str()),
            other => Err(format!("expected a number, got {}", other.type_str())),
        }
    };
    match value.get_ref() {
        DeValue::Integer(i) => parse_integer(i.as_str(), i.radix()).map(Setting::Integer),
        DeValue::Float(f) => parse_float(f.as_str()).map(|v| Setting::Number(v, None)),
        DeValue::String(s) => {
            let s: &str = s.as_ref();
            Ok(match split_quantity(s) {
                Some((v, unit)) => Setting::Number(v, unit),
                None => Setting::Text(s.to_string()),
            })
        }
        DeValue::Array(items) => items.iter().map(|item| scalar(item.get_ref())).collect::<std::result::Result<_, _>>().map(Setting::List),
        other => Err(format!("unsupported value type {}", other.type_str())),
    }
}

fn parse_integer(text: &str, radix: u32) -> std::result::Result<i64, String> {
    let clean: String = text.chars().filter(|&c| c != '_').collect();
    i64::from_str_radix(&clean, radix).map_err(|e| format!("invalid integer `{text}`: {e}"))
}

fn parse_float(text: &str) -> std::result::Result<f64, String> {
    let clean: String = text.chars().filter(|&c| c != '_').collect();
    clean.parse().map_err(|e| format!("invalid number `{text}`: {e}"))
}
