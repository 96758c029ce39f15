//! Configuration files, run manifests, CSV series and binary checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::diagnostics::DiagnosticsRecord;
use crate::experiments::{ExperimentError, FieldSpec, SweepKind, SweepPlan};
use crate::spectral::{
    ConvectiveForm, DtPolicy, FlowSystem, SolverParams, SpectralField, TorusGrid, DIVERGENCE_TOL,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = concat!("fracns ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: key `{key}`: {msg}")]
    Config { key: String, line: usize, msg: String },
    #[error("config error: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("empty series")]
    EmptySeries,
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("not an FNS1 checkpoint")]
    BadMagic,
    #[error("checkpoint truncated: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checkpoint mismatch: {0}")]
    Mismatch(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------- config

/// A fully materialized run description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: SolverParams,
    pub u0: FieldSpec,
    pub forcing: FieldSpec,
    pub sweep: Option<(SweepKind, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn grid(&self) -> &TorusGrid {
        self.params.grid()
    }

    /// The study described by the `[sweep]` section.
    pub fn plan(&self) -> Option<SweepPlan> {
        self.sweep.as_ref().map(|(kind, values)| SweepPlan {
            kind: *kind,
            values: values.clone(),
            base: self.params.clone(),
            u0: self.u0.clone(),
            t_end: self.params.t_end,
        })
    }

    pub fn initial_field(&self) -> Result<SpectralField, ExperimentError> {
        let project = self.params.system != FlowSystem::Burgers;
        self.u0.materialize(*self.grid(), project)
    }

    /// Canonical text form; parsing it gives back `self`.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let g = p.grid();
        let mut s = String::new();
        let _ = writeln!(s, "[grid]\ndim = {}\nn = {}\nlength = {:?}", g.dim(), g.n(), g.length());
        let (system, form) = match p.system {
            FlowSystem::NavierStokes(ConvectiveForm::Divergence) => ("navier_stokes", "divergence"),
            FlowSystem::NavierStokes(ConvectiveForm::Advective) => ("navier_stokes", "advective"),
            FlowSystem::Burgers => ("burgers", "advective"),
            FlowSystem::Linear => ("linear", "divergence"),
        };
        let _ = writeln!(
            s,
            "\n[physics]\nnu = {:?}\nalpha = {:?}\nepsilon = {:?}\ns = {:?}\nsystem = {system}\nform = {form}",
            p.nu, p.alpha, p.epsilon, p.s
        );
        let dt = match p.dt_policy {
            DtPolicy::Fixed(dt) => format!("{dt:?}"),
            DtPolicy::Cfl {
                courant,
                dt_min,
                dt_max,
                u_floor,
            } => format!(
                "cfl(courant = {courant:?}, dt_min = {dt_min:?}, dt_max = {dt_max:?}, u_floor = {u_floor:?})"
            ),
        };
        let _ = writeln!(s, "\n[time]\nt_end = {:?}\ndt = {dt}", p.t_end);
        let _ = writeln!(
            s,
            "\n[fields]\nu0 = {}\nforcing = {}",
            field_spec_text(&self.u0),
            field_spec_text(&self.forcing)
        );
        if let Some((kind, values)) = &self.sweep {
            let v: Vec<String> = values.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "\n[sweep]\nkind = {}\nvalues = {}", kind.name(), v.join(", "));
        }
        s
    }
}

pub fn field_spec_text(f: &FieldSpec) -> String {
    match f {
        FieldSpec::Zero => "zero".into(),
        FieldSpec::TaylorGreen { amplitude } => format!("taylor_green(amplitude = {amplitude:?})"),
        FieldSpec::Abc { amplitude } => format!("abc(amplitude = {amplitude:?})"),
        FieldSpec::SingleSine {
            component,
            amplitude,
        } => format!("single_sine(component = {component}, amplitude = {amplitude:?})"),
        FieldSpec::RandomSpectrum {
            seed,
            decay,
            amplitude,
            kmax,
        } => {
            let mut t = format!("random_spectrum(seed = {seed}, decay = {decay:?}, amplitude = {amplitude:?}");
            if kmax.is_finite() {
                let _ = write!(t, ", kmax = {kmax:?}");
            }
            t.push(')');
            t
        }
    }
}

/// Known keys and the section each belongs to.
const KEYS: &[(&str, &str)] = &[
    ("dim", "grid"),
    ("n", "grid"),
    ("length", "grid"),
    ("nu", "physics"),
    ("alpha", "physics"),
    ("epsilon", "physics"),
    ("s", "physics"),
    ("system", "physics"),
    ("form", "physics"),
    ("t_end", "time"),
    ("dt", "time"),
    ("u0", "fields"),
    ("forcing", "fields"),
    ("kind", "sweep"),
    ("values", "sweep"),
];

/// Sections that carry manifest metadata and are skipped by the config reader.
const META_SECTIONS: &[&str] = &["manifest", "derived"];

struct Entry {
    value: String,
    line: usize,
}

struct Entries {
    map: std::collections::BTreeMap<&'static str, Entry>,
}

impl Entries {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.map.get(key)
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> IoError {
        IoError::Config {
            key: key.into(),
            line: self.map.get(key).map_or(0, |e| e.line),
            msg: msg.into(),
        }
    }

    fn missing(key: &str) -> IoError {
        IoError::Config {
            key: key.into(),
            line: 0,
            msg: "missing required key".into(),
        }
    }

    fn num(&self, key: &str) -> Result<Option<f64>, IoError> {
        self.get(key)
            .map(|e| {
                e.value
                    .parse::<f64>()
                    .map_err(|_| self.err(key, format!("expected a number, got `{}`", e.value)))
            })
            .transpose()
    }

    fn int(&self, key: &str) -> Result<Option<usize>, IoError> {
        self.get(key)
            .map(|e| {
                e.value
                    .parse::<usize>()
                    .map_err(|_| self.err(key, format!("expected an integer, got `{}`", e.value)))
            })
            .transpose()
    }
}

fn split_lines(text: &str) -> Result<(Entries, Vec<(String, String, usize)>), IoError> {
    let mut map = std::collections::BTreeMap::new();
    let mut meta = Vec::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| IoError::Config {
                key: line.into(),
                line: line_no,
                msg: "malformed section header".into(),
            })?;
            let name = name.trim();
            if !META_SECTIONS.contains(&name) && !KEYS.iter().any(|(_, s)| *s == name) {
                return Err(IoError::Config {
                    key: name.into(),
                    line: line_no,
                    msg: "unknown section".into(),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| IoError::Config {
            key: line.into(),
            line: line_no,
            msg: "expected `key = value`".into(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if let Some(sec) = section.as_deref().filter(|s| META_SECTIONS.contains(s)) {
            meta.push((sec.to_string(), format!("{k}={v}"), line_no));
            continue;
        }
        let Some(&(key, home)) = KEYS.iter().find(|(name, _)| *name == k) else {
            return Err(IoError::Config {
                key: k.into(),
                line: line_no,
                msg: "unknown key".into(),
            });
        };
        if let Some(sec) = &section {
            if sec != home {
                return Err(IoError::Config {
                    key: k.into(),
                    line: line_no,
                    msg: format!("belongs in section [{home}], found in [{sec}]"),
                });
            }
        }
        if map
            .insert(
                key,
                Entry {
                    value: v.to_string(),
                    line: line_no,
                },
            )
            .is_some()
        {
            return Err(IoError::Config {
                key: k.into(),
                line: line_no,
                msg: "duplicate key".into(),
            });
        }
    }
    Ok((Entries { map }, meta))
}

/// `name` or `name(k = v, …)`.
fn parse_call(text: &str) -> Option<(String, Vec<(String, String)>)> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        return Some((text.to_string(), Vec::new()));
    };
    let inner = text[open + 1..].strip_suffix(')')?;
    let mut args = Vec::new();
    for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=')?;
        args.push((k.trim().to_string(), v.trim().to_string()));
    }
    Some((text[..open].trim().to_string(), args))
}

fn parse_field_spec(e: &Entries, key: &str) -> Result<Option<FieldSpec>, IoError> {
    let Some(entry) = e.get(key) else {
        return Ok(None);
    };
    let bad = |msg: String| e.err(key, msg);
    let (name, args) =
        parse_call(&entry.value).ok_or_else(|| bad(format!("malformed field spec `{}`", entry.value)))?;
    let allowed: &[&str] = match name.as_str() {
        "zero" => &[],
        "taylor_green" | "abc" => &["amplitude"],
        "single_sine" => &["component", "amplitude"],
        "random_spectrum" => &["seed", "decay", "amplitude", "kmax"],
        other => return Err(bad(format!("unknown field kind `{other}`"))),
    };
    if let Some((k, _)) = args.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(bad(format!("`{name}` has no argument `{k}`")));
    }
    let arg = |k: &str| args.iter().find(|(a, _)| a == k).map(|(_, v)| v.as_str());
    let real = |k: &str, default: Option<f64>| -> Result<f64, IoError> {
        match arg(k) {
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| bad(format!("argument `{k}` expects a number, got `{v}`"))),
            None => default.ok_or_else(|| bad(format!("`{name}` needs argument `{k}`"))),
        }
    };
    Ok(Some(match name.as_str() {
        "zero" => FieldSpec::Zero,
        "taylor_green" => FieldSpec::TaylorGreen {
            amplitude: real("amplitude", Some(1.0))?,
        },
        "abc" => FieldSpec::Abc {
            amplitude: real("amplitude", Some(1.0))?,
        },
        "single_sine" => FieldSpec::SingleSine {
            component: arg("component")
                .unwrap_or("0")
                .parse()
                .map_err(|_| bad("argument `component` expects an integer".into()))?,
            amplitude: real("amplitude", Some(1.0))?,
        },
        _ => FieldSpec::RandomSpectrum {
            seed: arg("seed")
                .ok_or_else(|| bad("`random_spectrum` needs argument `seed`".into()))?
                .parse()
                .map_err(|_| bad("argument `seed` expects an integer".into()))?,
            decay: real("decay", None)?,
            amplitude: real("amplitude", None)?,
            kmax: real("kmax", Some(f64::INFINITY))?,
        },
    }))
}

fn parse_dt(e: &Entries) -> Result<DtPolicy, IoError> {
    let Some(entry) = e.get("dt") else {
        return Ok(DtPolicy::cfl(DtPolicy::COURANT));
    };
    if let Ok(dt) = entry.value.parse::<f64>() {
        return Ok(DtPolicy::Fixed(dt));
    }
    let parsed = parse_call(&entry.value).filter(|(name, _)| name == "cfl");
    let Some((_, args)) = parsed else {
        return Err(e.err("dt", format!("expected a number or cfl(...), got `{}`", entry.value)));
    };
    let mut vals = [
        ("courant", DtPolicy::COURANT),
        ("dt_min", DtPolicy::DT_MIN),
        ("dt_max", DtPolicy::DT_MAX),
        ("u_floor", DtPolicy::U_FLOOR),
    ];
    for (k, v) in &args {
        let slot = vals
            .iter_mut()
            .find(|(name, _)| name == k)
            .ok_or_else(|| e.err("dt", format!("cfl has no argument `{k}`")))?;
        slot.1 = v
            .parse()
            .map_err(|_| e.err("dt", format!("argument `{k}` expects a number, got `{v}`")))?;
    }
    Ok(DtPolicy::Cfl {
        courant: vals[0].1,
        dt_min: vals[1].1,
        dt_max: vals[2].1,
        u_floor: vals[3].1,
    })
}

/// Parses the `key = value` configuration format with `[section]` headers
/// and `#` comments. Keys may also appear before any section header.
pub fn parse_config(text: &str) -> Result<ParsedConfig, IoError> {
    let (e, _) = split_lines(text)?;
    parse_entries(&e)
}

fn parse_entries(e: &Entries) -> Result<ParsedConfig, IoError> {
    let mut warnings = Vec::new();
    let dim = e.int("dim")?.ok_or_else(|| Entries::missing("dim"))?;
    let n = e.int("n")?.ok_or_else(|| Entries::missing("n"))?;
    let length = e.num("length")?.unwrap_or(2.0 * std::f64::consts::PI);
    let grid = TorusGrid::new(dim, n, length).map_err(|err| {
        let key = if dim != 2 && dim != 3 {
            "dim"
        } else if length.is_finite() && length > 0.0 {
            "n"
        } else {
            "length"
        };
        e.err(key, err.to_string())
    })?;
    let nu = e.num("nu")?.ok_or_else(|| Entries::missing("nu"))?;
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(e.err("nu", format!("must be positive, got {nu}")));
    }
    let alpha = e.num("alpha")?.unwrap_or(0.0);
    if !(0.0..=0.5).contains(&alpha) {
        return Err(e.err(
            "alpha",
            format!("{alpha} is outside the allowed range (0, 1/2] (0 selects the classical Laplacian)"),
        ));
    }
    if alpha > 0.0 && dim != 2 {
        return Err(e.err("alpha", "the fractional exponent applies to dim = 2 only"));
    }
    let epsilon = e.num("epsilon")?.unwrap_or(0.0);
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(e.err("epsilon", format!("must be >= 0, got {epsilon}")));
    }
    if epsilon > 0.0 && dim != 3 {
        return Err(e.err("epsilon", "the regularization applies to dim = 3 only"));
    }
    let s = e.num("s")?.unwrap_or(2.0);
    if !(s > 1.0 && s.is_finite()) {
        return Err(e.err("s", format!("must exceed 1, got {s}")));
    }
    if epsilon > 0.0 && s <= 1.25 {
        warnings.push(format!(
            "s = {s} <= 5/4 is not sub-critical; the regularization does not control the nonlinearity"
        ));
    }
    let form = match e.get("form").map(|x| x.value.as_str()) {
        None | Some("divergence") => ConvectiveForm::Divergence,
        Some("advective") => ConvectiveForm::Advective,
        Some(other) => {
            return Err(e.err("form", format!("expected divergence or advective, got `{other}`")))
        }
    };
    let system = match e.get("system").map(|x| x.value.as_str()) {
        None | Some("navier_stokes") => FlowSystem::NavierStokes(form),
        Some("burgers") => FlowSystem::Burgers,
        Some("linear") => FlowSystem::Linear,
        Some(other) => {
            return Err(e.err(
                "system",
                format!("expected navier_stokes, burgers or linear, got `{other}`"),
            ))
        }
    };
    if system == FlowSystem::Burgers && dim != 3 {
        return Err(e.err("system", "the Burgers system needs dim = 3"));
    }
    let t_end = e.num("t_end")?.ok_or_else(|| Entries::missing("t_end"))?;
    let dt_policy = parse_dt(e)?;
    let u0 = parse_field_spec(e, "u0")?.unwrap_or(FieldSpec::TaylorGreen { amplitude: 1.0 });
    let forcing_spec = parse_field_spec(e, "forcing")?.unwrap_or(FieldSpec::Zero);
    let project = system != FlowSystem::Burgers;
    let forcing = forcing_spec
        .materialize(grid, project)
        .map_err(|err| e.err("forcing", err.to_string()))?;
    u0.materialize(grid, project)
        .map_err(|err| e.err("u0", err.to_string()))?;
    let params = SolverParams {
        nu,
        alpha,
        epsilon,
        s,
        forcing,
        dt_policy,
        t_end,
        system,
    };
    params.validate().map_err(|err| {
        let msg = err.to_string();
        let key = if msg.contains("dt") || msg.contains("cfl") {
            "dt"
        } else if msg.contains("t_end") {
            "t_end"
        } else {
            "forcing"
        };
        e.err(key, err.to_string())
    })?;
    let sweep = match e.get("kind") {
        None => {
            if e.get("values").is_some() {
                return Err(e.err("values", "values given without a sweep kind"));
            }
            None
        }
        Some(k) => {
            let kind = SweepKind::parse(&k.value)
                .ok_or_else(|| e.err("kind", format!("unknown sweep kind `{}`", k.value)))?;
            let values = match e.get("values") {
                None => Vec::new(),
                Some(v) => v
                    .value
                    .split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty())
                    .map(|x| {
                        x.parse::<f64>()
                            .map_err(|_| e.err("values", format!("expected a number, got `{x}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            };
            if matches!(kind, SweepKind::AlphaSweep | SweepKind::EpsilonSweep)
                && values.windows(2).any(|w| !(w[0] > w[1]))
            {
                return Err(e.err("values", "limit sweeps need strictly decreasing values"));
            }
            if kind == SweepKind::AlphaSweep {
                if let Some(a) = values.iter().find(|&&a| !(a > 0.0 && a <= 0.5)) {
                    return Err(e.err(
                        "values",
                        format!("alpha = {a} is outside the allowed range (0, 1/2]"),
                    ));
                }
            }
            Some((kind, values))
        }
    };
    Ok(ParsedConfig {
        config: RunConfig {
            params,
            u0,
            forcing: forcing_spec,
            sweep,
        },
        warnings,
    })
}

// ---------------------------------------------------------------- manifest

/// Everything needed to reproduce a run, plus the derived constants.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub derived: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn new(config: RunConfig) -> Self {
        let g = *config.grid();
        let derived = vec![
            ("lambda1".to_string(), g.lambda1()),
            ("c_P".to_string(), g.poincare_constant()),
        ];
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            config,
            derived,
        }
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Self {
        self.derived.push((name.to_string(), value));
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "[manifest]\nschema_version = {}\ntool_version = {}\n\n",
            self.schema_version, self.tool_version
        );
        s.push_str(&self.config.to_text());
        s.push_str("\n[derived]\n");
        for (k, v) in &self.derived {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let (e, meta) = split_lines(text)?;
        let config = parse_entries(&e)?.config;
        let mut schema_version = None;
        let mut tool_version = None;
        let mut derived = Vec::new();
        for (section, kv, line) in meta {
            let (k, v) = kv.split_once('=').expect("stored as k=v");
            let bad = |msg: &str| IoError::Config {
                key: k.to_string(),
                line,
                msg: msg.to_string(),
            };
            match (section.as_str(), k) {
                ("manifest", "schema_version") => {
                    schema_version = Some(v.parse().map_err(|_| bad("expected an integer"))?)
                }
                ("manifest", "tool_version") => tool_version = Some(v.to_string()),
                ("manifest", _) => return Err(bad("unknown key")),
                _ => derived.push((k.to_string(), v.parse().map_err(|_| bad("expected a number"))?)),
            }
        }
        Ok(Self {
            schema_version: schema_version
                .ok_or_else(|| IoError::Invalid("manifest lacks schema_version".into()))?,
            tool_version: tool_version
                .ok_or_else(|| IoError::Invalid("manifest lacks tool_version".into()))?,
            config,
            derived,
        })
    }
}

// ---------------------------------------------------------------- CSV

pub const CSV_HEADER: &str =
    "t,dt,l2_sq,h1_sq,h1a_sq,h2_sq,energy_residual,orth_residual,bound_1_9_ok";

pub fn series_to_csv(records: &[DiagnosticsRecord]) -> Result<String, IoError> {
    if records.is_empty() {
        return Err(IoError::EmptySeries);
    }
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.t,
            r.dt,
            r.l2_sq,
            r.h1_sq,
            r.h1a_sq,
            r.h2_sq,
            r.energy_residual,
            r.orth_residual,
            u8::from(r.bound_1_9_ok)
        );
    }
    Ok(s)
}

pub fn write_series(records: &[DiagnosticsRecord], path: &Path) -> Result<(), IoError> {
    let text = series_to_csv(records)?;
    fs::write(path, text).map_err(io_err(path))
}

pub fn parse_series(text: &str) -> Result<Vec<DiagnosticsRecord>, IoError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(IoError::Csv {
            line: 1,
            msg: "unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = |msg: String| IoError::Csv { line: i + 2, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("expected 9 fields, found {}", f.len())));
        }
        let x = |j: usize| -> Result<f64, IoError> {
            f[j].parse()
                .map_err(|_| bad(format!("field {} is not a number: `{}`", j + 1, f[j])))
        };
        let ok = match f[8] {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("bound flag must be 0 or 1, got `{other}`"))),
        };
        out.push(DiagnosticsRecord {
            t: x(0)?,
            dt: x(1)?,
            l2_sq: x(2)?,
            h1_sq: x(3)?,
            h1a_sq: x(4)?,
            h2_sq: x(5)?,
            energy_residual: x(6)?,
            orth_residual: x(7)?,
            bound_1_9_ok: ok,
        });
    }
    Ok(out)
}

pub fn read_series(path: &Path) -> Result<Vec<DiagnosticsRecord>, IoError> {
    parse_series(&fs::read_to_string(path).map_err(io_err(path))?)
}

// ---------------------------------------------------------------- checkpoint

pub const MAGIC: &[u8; 4] = b"FNS1";
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 4;

pub fn encode_checkpoint(t: f64, u: &SpectralField) -> Vec<u8> {
    let g = u.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + u.ncomp() * g.len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.length().to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    out.extend_from_slice(&(u.ncomp() as u32).to_le_bytes());
    for c in u.components() {
        for z in c {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

/// Decodes a checkpoint; `expect` rejects a grid other than the given one.
pub fn decode_checkpoint(
    bytes: &[u8],
    expect: Option<&TorusGrid>,
) -> Result<(f64, SpectralField), IoError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(IoError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(IoError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let (dim, n, length, t, comps) = (
        u32_at(4) as usize,
        u32_at(8) as usize,
        f64_at(12),
        f64_at(20),
        u32_at(28) as usize,
    );
    let grid = TorusGrid::new(dim, n, length).map_err(|e| IoError::Mismatch(e.to_string()))?;
    if let Some(want) = expect {
        if want.dim() != dim || want.n() != n || want.length().to_bits() != length.to_bits() {
            return Err(IoError::Mismatch(format!(
                "checkpoint grid {dim}-D n = {n} length = {length}, expected {}-D n = {} length = {}",
                want.dim(),
                want.n(),
                want.length()
            )));
        }
    }
    if comps != dim {
        return Err(IoError::Mismatch(format!(
            "{comps} components on a {dim}-D grid"
        )));
    }
    let payload = comps
        .checked_mul(grid.len())
        .and_then(|x| x.checked_mul(16))
        .ok_or_else(|| IoError::Mismatch("payload size overflows".into()))?;
    let found = bytes.len() - HEADER_LEN;
    if found != payload {
        return Err(IoError::Truncated {
            expected: payload,
            found,
        });
    }
    let mut data = bytes[HEADER_LEN..].chunks_exact(16).map(|ch| {
        Complex64::new(
            f64::from_le_bytes(ch[..8].try_into().expect("8 bytes")),
            f64::from_le_bytes(ch[8..].try_into().expect("8 bytes")),
        )
    });
    let comps: Vec<Vec<Complex64>> = (0..comps)
        .map(|_| data.by_ref().take(grid.len()).collect())
        .collect();
    let mut u = SpectralField::from_components(grid, comps)
        .map_err(|e| IoError::Mismatch(e.to_string()))?;
    let flag = u.divergence_defect() <= DIVERGENCE_TOL;
    u.set_solenoidal(flag);
    Ok((t, u))
}

pub fn checkpoint_save(path: &Path, t: f64, u: &SpectralField) -> Result<(), IoError> {
    fs::write(path, encode_checkpoint(t, u)).map_err(io_err(path))
}

pub fn checkpoint_load(
    path: &Path,
    expect: Option<&TorusGrid>,
) -> Result<(f64, SpectralField), IoError> {
    decode_checkpoint(&fs::read(path).map_err(io_err(path))?, expect)
}
