use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use fracns::cli_io::{
    checkpoint_load, checkpoint_save, parse_config, write_series, IoError, ParsedConfig, RunConfig,
    RunManifest,
};
use fracns::diagnostics::{
    check_l2_bound, check_time_integrated_bounds, criticality_exponent, sobolev_norm_sq,
    DiagnosticsRecord, SCENARIOS,
};
use fracns::experiments::{
    run_alpha_sweep, run_burgers, run_epsilon_sweep, run_smallness, run_supercritical_probe,
    ExperimentError, ProbeReport, SmallnessConfig, SweepKind, Table,
};
use fracns::fracpow::{frac_power, frac_power_1plus, spectral_power, OperatorSpec, QuadratureConfig};
use fracns::integrator::{IntegratorError, Observer, RunState, RunStatus, Solver};
use fracns::spectral::{DtPolicy, FlowSystem};

#[derive(Parser)]
#[command(name = "fracns", version, about = "Fractional Navier–Stokes solver and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file; a built-in benchmark is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweep members.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write a checkpoint every this many steps (0 disables).
    #[arg(long, default_value_t = 0)]
    checkpoint_every: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write its series.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Resume from an FNS1 checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// α → 0⁺ sweep in 2-D.
    SweepAlpha(Common),
    /// ε → 0⁺ sweep in 3-D with s = 2.
    SweepEpsilon(Common),
    /// Small-data H¹ bound in 3-D.
    Smallness(Common),
    /// Exploratory amplitude ladder for unregularized 3-D flow.
    SupercriticalProbe(Common),
    /// Maximum principle for the 3-D Burgers system.
    Burgers(Common),
    /// Balakrishnan quadrature against the eigendecomposition.
    FracpowVerify,
    /// Print the criticality exponent table.
    Exponents,
}

enum Failure {
    Config(String),
    BlowUp(String),
    Violation(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::BlowUp(_) => 3,
            Failure::Violation(_) => 4,
            Failure::Io(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::BlowUp(m) | Failure::Violation(m) | Failure::Io(m) => m,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Config { .. } | IoError::Invalid(_) => Failure::Config(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::MemberBlowUp { .. } | ExperimentError::Integrator(IntegratorError::BlowUp { .. }) => {
                Failure::BlowUp(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<IntegratorError> for Failure {
    fn from(e: IntegratorError) -> Self {
        ExperimentError::from(e).into()
    }
}

const SIMULATE_DEFAULT: &str = "\
[grid]
dim = 2
n = 128
[physics]
nu = 0.1
alpha = 0.25
[time]
t_end = 1
dt = 0.005
[fields]
u0 = random_spectrum(seed = 7, decay = 3, amplitude = 0.5)
";

const ALPHA_DEFAULT: &str = "\
[grid]
dim = 2
n = 128
[physics]
nu = 0.1
[time]
t_end = 1
dt = 0.005
[fields]
u0 = random_spectrum(seed = 7, decay = 3, amplitude = 0.5)
[sweep]
kind = alpha_sweep
values = 0.5, 0.25, 0.1, 0.05
";

const EPSILON_DEFAULT: &str = "\
[grid]
dim = 3
n = 64
[physics]
nu = 0.5
epsilon = 0.1
s = 2
[time]
t_end = 1
dt = 0.02
[fields]
u0 = abc(amplitude = 0.1)
[sweep]
kind = epsilon_sweep
values = 0.1, 0.01, 0.001
";

const SMALLNESS_DEFAULT: &str = "\
[grid]
dim = 3
n = 64
[physics]
nu = 1
[time]
t_end = 50
dt = 0.5
[fields]
u0 = random_spectrum(seed = 3, decay = 3, amplitude = 0.012)
forcing = taylor_green(amplitude = 0.005)
";

const PROBE_DEFAULT: &str = "\
[grid]
dim = 3
n = 32
[physics]
nu = 0.01
[time]
t_end = 2
[fields]
u0 = taylor_green(amplitude = 1)
[sweep]
kind = supercritical_probe
values = 0.5, 1, 2, 4
";

const BURGERS_DEFAULT: &str = "\
[grid]
dim = 3
n = 64
[physics]
nu = 0.1
system = burgers
[time]
t_end = 2
[fields]
u0 = random_spectrum(seed = 11, decay = 4, amplitude = 1, kmax = 4)
";

fn load_config(common: &Common, default: &str) -> Result<RunConfig, Failure> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
        None => default.to_string(),
    };
    let ParsedConfig { config, warnings } = parse_config(&text)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(config)
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), Failure> {
    write_text(&dir.join("manifest.txt"), &manifest.to_text())
}

fn write_summary(dir: &Path, table: &Table) -> Result<(), Failure> {
    print!("{}", table.to_csv());
    write_text(&dir.join("summary.csv"), &table.to_csv())
}

fn write_member(dir: &Path, name: &str, series: &[DiagnosticsRecord]) -> Result<(), Failure> {
    if series.is_empty() {
        return Ok(());
    }
    let runs = dir.join("runs");
    prepare_out(&runs)?;
    write_series(series, &runs.join(format!("{name}.csv"))).map_err(Failure::from)
}

fn simulate(common: &Common, resume: Option<&Path>) -> Result<(), Failure> {
    let config = load_config(common, SIMULATE_DEFAULT)?;
    prepare_out(&common.out)?;
    write_manifest(&common.out, &RunManifest::new(config.clone()))?;
    let solver = Solver::new(config.params.clone())?;
    let state = match resume {
        Some(path) => {
            let (t, u) = checkpoint_load(path, Some(config.grid()))?;
            let step_index = match config.params.dt_policy {
                DtPolicy::Fixed(dt) => (t / dt).round() as u64,
                DtPolicy::Cfl { .. } => 0,
            };
            RunState { t, u, step_index }
        }
        None => RunState::initial(
            config
                .initial_field()
                .map_err(|e| Failure::Config(e.to_string()))?,
        ),
    };
    let every = common.checkpoint_every;
    let out = common.out.clone();
    let mut ck_err: Option<IoError> = None;
    let mut ck = |s: &RunState, _: &DiagnosticsRecord| {
        if every > 0 && s.step_index > 0 && s.step_index % every == 0 && ck_err.is_none() {
            let path = out.join(format!("checkpoint_{:08}.fns1", s.step_index));
            if let Err(e) = checkpoint_save(&path, s.t, &s.u) {
                ck_err = Some(e);
            }
        }
    };
    let result = solver.run_from(state, &mut [&mut ck as &mut dyn Observer])?;
    if let Some(e) = ck_err {
        return Err(e.into());
    }
    write_series(&result.series, &common.out.join("series.csv"))?;
    checkpoint_save(&common.out.join("final.fns1"), result.final_state.t, &result.final_state.u)?;
    let mut reports = vec![check_l2_bound(&result.series, &config.params)];
    reports.extend(check_time_integrated_bounds(&result.series, &config.params));
    for r in &reports {
        println!("{}: lhs = {:e} rhs = {:e} violated = {}", r.bound_name, r.lhs, r.rhs, r.violated);
    }
    match result.status {
        RunStatus::BlowUp { t, .. } => Err(Failure::BlowUp(format!("blow-up at t = {t}"))),
        RunStatus::Completed => Ok(()),
    }
}

fn require_kind(config: &RunConfig, kind: SweepKind) -> Result<Vec<f64>, Failure> {
    match &config.sweep {
        Some((k, values)) if *k == kind => Ok(values.clone()),
        _ => Err(Failure::Config(format!("config needs [sweep] kind = {}", kind.name()))),
    }
}

fn sweep_alpha(common: &Common) -> Result<(), Failure> {
    let config = load_config(common, ALPHA_DEFAULT)?;
    require_kind(&config, SweepKind::AlphaSweep)?;
    let plan = config.plan().expect("sweep present");
    prepare_out(&common.out)?;
    let report = run_alpha_sweep(&plan, common.workers)?;
    let manifest = RunManifest::new(config).with_constant("shared_l2_rhs", report.shared_rhs);
    write_manifest(&common.out, &manifest)?;
    write_member(&common.out, "alpha_0", &report.reference.series)?;
    for (i, row) in report.rows.iter().enumerate() {
        write_member(&common.out, &format!("alpha_{}", i + 1), &row.run.series)?;
    }
    write_summary(&common.out, &report.table())?;
    println!("note: one deterministic trajectory family; distinct weak limits along other sequences are not probed");
    if report.violations() > 0 {
        return Err(Failure::Violation(format!("{} L² bound violations", report.violations())));
    }
    if !report.errors_strictly_decreasing() {
        return Err(Failure::Violation("e(alpha) is not strictly decreasing".into()));
    }
    Ok(())
}

fn sweep_epsilon(common: &Common) -> Result<(), Failure> {
    let config = load_config(common, EPSILON_DEFAULT)?;
    require_kind(&config, SweepKind::EpsilonSweep)?;
    let plan = config.plan().expect("sweep present");
    prepare_out(&common.out)?;
    write_manifest(&common.out, &RunManifest::new(config))?;
    let report = run_epsilon_sweep(&plan, common.workers)?;
    for (i, row) in report.rows.iter().enumerate() {
        write_member(&common.out, &format!("epsilon_{i}"), &row.series)?;
    }
    write_summary(&common.out, &report.table())?;
    if report.violations() > 0 {
        return Err(Failure::Violation(format!("{} bound violations", report.violations())));
    }
    Ok(())
}

fn smallness(common: &Common) -> Result<(), Failure> {
    let config = load_config(common, SMALLNESS_DEFAULT)?;
    let grid = *config.grid();
    let constants = SmallnessConfig::torus(&grid, config.params.nu);
    let mut manifest = RunManifest::new(config.clone());
    for (k, v) in constants.describe() {
        manifest = manifest.with_constant(k, v);
    }
    prepare_out(&common.out)?;
    write_manifest(&common.out, &manifest)?;
    let u0 = config
        .initial_field()
        .map_err(|e| Failure::Config(e.to_string()))?;
    println!("initial ‖u0‖²_H1 = {:e}", sobolev_norm_sq(&u0, 1.0));
    for (k, v) in constants.describe() {
        println!("{k} = {v:e}");
    }
    let verdict = run_smallness(&constants, &config.params, &u0)?;
    write_member(&common.out, "smallness", &verdict.run.series)?;
    println!(
        "sup ‖u‖²_H1 = {:e}, z_min = {:e}, ODE majorizes: {}, confirmed: {}",
        verdict.sup_h1, verdict.z_min, verdict.ode_majorizes, verdict.confirmed
    );
    if !verdict.confirmed {
        return Err(Failure::Violation("smallness bound not confirmed".into()));
    }
    Ok(())
}

fn probe(common: &Common) -> Result<(), Failure> {
    let config = load_config(common, PROBE_DEFAULT)?;
    let amplitudes = require_kind(&config, SweepKind::SupercriticalProbe)?;
    prepare_out(&common.out)?;
    write_manifest(&common.out, &RunManifest::new(config.clone()))?;
    let report = run_supercritical_probe(&config.params, &config.u0, &amplitudes, common.workers)?;
    for (i, row) in report.rows.iter().enumerate() {
        write_member(&common.out, &format!("amplitude_{i}"), &row.series)?;
    }
    write_summary(&common.out, &report.table())?;
    println!("note: {}", ProbeReport::NOTE);
    Ok(())
}

fn burgers(common: &Common) -> Result<(), Failure> {
    let config = load_config(common, BURGERS_DEFAULT)?;
    if config.params.system != FlowSystem::Burgers {
        return Err(Failure::Config("config needs system = burgers".into()));
    }
    prepare_out(&common.out)?;
    write_manifest(&common.out, &RunManifest::new(config.clone()))?;
    let u0 = config
        .initial_field()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let report = run_burgers(&config.params, &u0)?;
    write_member(&common.out, "burgers", &report.series)?;
    println!(
        "initial sup-norms {:?}; max relative excess {:e}; violating steps {}; max sub-criticality ratio {:e}",
        report.initial_sup, report.max_excess, report.violating_steps, report.max_subcritical_ratio
    );
    if let RunStatus::BlowUp { t, .. } = report.status {
        return Err(Failure::BlowUp(format!("blow-up at t = {t}")));
    }
    if !report.holds() {
        return Err(Failure::Violation("maximum principle violated".into()));
    }
    Ok(())
}

fn fracpow_verify() -> Result<(), Failure> {
    let a = OperatorSpec::dirichlet_laplacian(32);
    let q = QuadratureConfig::default_for(&a);
    let h = 1.0 / 33.0;
    let v = DVector::from_fn(32, |i, _| {
        let x = (i + 1) as f64 * h;
        (std::f64::consts::PI * x).sin() + 0.3 * (5.0 * std::f64::consts::PI * x).sin()
    });
    let mut worst: f64 = 0.0;
    println!("power,relative_error,tail_remainder");
    for eta in [0.25, 0.5, 0.75] {
        let r = frac_power(&a, eta, &q, &v).map_err(|e| Failure::Config(e.to_string()))?;
        let exact = spectral_power(&a, eta, &v);
        let err = (&r.value - &exact).norm() / exact.norm();
        worst = worst.max(err);
        println!("{eta},{err:e},{:e}", r.remainder);
    }
    for alpha in [0.1, 0.3] {
        let r = frac_power_1plus(&a, alpha, &q, &v).map_err(|e| Failure::Config(e.to_string()))?;
        let exact = spectral_power(&a, 1.0 + alpha, &v);
        let err = (&r.value - &exact).norm() / exact.norm();
        worst = worst.max(err);
        println!("{},{err:e},{:e}", 1.0 + alpha, r.remainder);
    }
    if worst > 1e-6 {
        return Err(Failure::Violation(format!("worst relative error {worst:e} exceeds 1e-6")));
    }
    Ok(())
}

fn exponents() -> Result<(), Failure> {
    println!("scenario,theta,critical_s,source");
    for s in SCENARIOS {
        let dim = if s.starts_with("2d") { 2 } else { 3 };
        let c = criticality_exponent(dim, s).map_err(|e| Failure::Config(e.to_string()))?;
        let crit = c.critical_s.map_or(String::new(), |r| r.to_string());
        println!("{},{},{},\"{}\"", c.scenario, c.theta, crit, c.label);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, resume } => simulate(common, resume.as_deref()),
        Command::SweepAlpha(c) => sweep_alpha(c),
        Command::SweepEpsilon(c) => sweep_epsilon(c),
        Command::Smallness(c) => smallness(c),
        Command::SupercriticalProbe(c) => probe(c),
        Command::Burgers(c) => burgers(c),
        Command::FracpowVerify => fracpow_verify(),
        Command::Exponents => exponents(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
