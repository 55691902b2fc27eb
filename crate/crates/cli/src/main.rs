//! `swarm-density`: runs scenarios and the numerical checks behind them.
//!
//! Every check prints one `PASS`/`FAIL` line; the exit status is 1 when a
//! check fails and 2 when the command could not run at all.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarm_density::checks::{self, Check};
use swarm_density::crossval::cross_validate;
use swarm_density::oracle::{self, evolve_continuity, heat_run, GridSolverConfig};
use swarm_density::runner::{self, prepare, with_threads};
use swarm_density::scenario::Scenario;
use swarm_density::{Result, ScalarField};

const HEAT_TOLERANCE: f64 = 0.02;
const TRANSFORMATION_TOLERANCE: f64 = 0.05;
const CROSSVAL_TOLERANCE: f64 = 0.15;
const MASS_TOLERANCE: f64 = 1e-10;
/// Step budget for the swarm to reach its e-folding in `oracle crossval`.
const CROSSVAL_MAX_STEPS: usize = 100_000;
const LYAPUNOV_STEPS: usize = 1000;

#[derive(Parser)]
#[command(
    name = "swarm-density",
    version,
    about = "Swarm density control by feedback on a kernel density estimate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts to `--out`.
    Run(RunArgs),
    /// Grid-solver checks.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Estimator consistency suite.
    KdeCheck(CommonArgs),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Cosine eigenmode decay, conservation and energy monotonicity.
    Heat(CommonArgs),
    /// Feedback-driven continuity step against the heat step.
    Continuity(CommonArgs),
    /// Particle simulation against the grid continuity solver.
    Crossval(CommonArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    snapshot_every: Option<usize>,
}

#[derive(Args)]
struct CommonArgs {
    /// Without a scenario the defaults on the unit square apply.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Also write the report to `<out>/<command>.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Scenario> {
    let mut s = match path {
        Some(p) => Scenario::load(p)?,
        None => Scenario::parse("name = default\ndesired.kind = uniform\n", None)?,
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn report(checks: &[Check], title: &str, out: Option<&Path>) -> Result<bool> {
    let mut text = String::new();
    for c in checks {
        text.push_str(&format!(
            "{} {title} {}: {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    print!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.txt", title.replace(' ', "-"))), &text)?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn random_zero_mean(cfg: &GridSolverConfig, seed: u64) -> Result<ScalarField> {
    let n = cfg.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    ScalarField::new(*cfg.domain(), n, n, raw.into_iter().map(|v| v - mean).collect())
}

fn oracle_heat(s: &Scenario) -> Result<Vec<Check>> {
    let diffusion = s.oracle_diffusion.unwrap_or(s.diffusion);
    let mode = oracle::eigenmode_decay(s.domain, s.oracle_n, diffusion, s.oracle_t)?;
    let mut out = vec![check(
        "eigenmode",
        mode.rel_error < HEAT_TOLERANCE,
        format!(
            "n = {}, t = {:.6}, {} steps: amplitude {:.6} vs exp(-D (pi/L)^2 t) = {:.6}, rel. error {:.3e} (limit {HEAT_TOLERANCE})",
            mode.n, mode.t, mode.steps, mode.measured, mode.predicted, mode.rel_error
        ),
    )];

    let dt = 0.95 * GridSolverConfig::stable_dt(s.domain, s.oracle_n, diffusion);
    let cfg = GridSolverConfig::new(s.domain, s.oracle_n, dt, diffusion)?;
    let phi = random_zero_mean(&cfg, s.seed)?;
    let (end, trace) = heat_run(&phi, &cfg, LYAPUNOV_STEPS)?;
    let rises = trace.windows(2).filter(|w| w[1] > w[0]).count();
    out.push(check(
        "lyapunov",
        rises == 0,
        format!(
            "{LYAPUNOV_STEPS} steps from seeded noise: V {:.6e} -> {:.6e}, {rises} increases",
            trace[0], trace[LYAPUNOV_STEPS]
        ),
    ));
    let drift = (end.integrate() - phi.integrate()).abs();
    out.push(check(
        "conservation",
        drift < MASS_TOLERANCE,
        format!("integral drift {drift:.3e} (limit {MASS_TOLERANCE:e})"),
    ));
    Ok(out)
}

fn oracle_continuity(s: &Scenario) -> Result<Vec<Check>> {
    let diffusion = s.oracle_diffusion.unwrap_or(s.diffusion);
    let t = oracle::transformation_check(s.oracle_n, diffusion, s.oracle_scheme)?;
    let mut out = vec![check(
        "transformation",
        t.rel_l2 < TRANSFORMATION_TOLERANCE,
        format!(
            "n = {}, {:?} flux: relative L2 gap to the heat step {:.3e} (limit {TRANSFORMATION_TOLERANCE})",
            t.n, t.scheme, t.rel_l2
        ),
    )];

    let (f, _, fd, _) = oracle::analytic_pair();
    let domain = swarm_density::Domain::unit_square();
    let start = ScalarField::from_fn(domain, s.oracle_n, s.oracle_n, f)?;
    let target = ScalarField::from_fn(domain, s.oracle_n, s.oracle_n, fd)?;
    let horizon = s.oracle_t.unwrap_or(0.01);
    let end = evolve_continuity(&start, &target, diffusion, 0.0, horizon, s.oracle_scheme)?;
    let drift = (end.integrate() - start.integrate()).abs() / start.integrate();
    out.push(check(
        "conservation",
        drift < MASS_TOLERANCE,
        format!("relative mass drift over t = {horizon} is {drift:.3e} (limit {MASS_TOLERANCE:e})"),
    ));
    Ok(out)
}

fn oracle_crossval(s: &Scenario) -> Result<Vec<Check>> {
    let prepared = prepare(s)?;
    let sim = prepared.simulation(s)?;
    let cv = cross_validate(
        &sim,
        &prepared.desired,
        &prepared.config,
        s.oracle_scheme,
        CROSSVAL_MAX_STEPS,
    )?;
    Ok(vec![check(
        "crossval",
        cv.rel_l1 < CROSSVAL_TOLERANCE,
        format!(
            "{} steps to t = {:.5} (E {:.4} -> {:.4}): relative L1 gap to the grid solution {:.3e} (limit {CROSSVAL_TOLERANCE})",
            cv.steps, cv.t, cv.error_start, cv.error_end, cv.rel_l1
        ),
    )])
}

fn kde_check(s: &Scenario) -> Result<Vec<Check>> {
    let kernel = s.kernel()?;
    let prepared = prepare(s)?;
    let seeds = [s.seed, s.seed.wrapping_add(1), s.seed.wrapping_add(2)];
    checks::run_suite(&kernel, prepared.bandwidth, &seeds)
}

fn run(args: RunArgs) -> Result<bool> {
    let mut s = Scenario::load(&args.scenario)?;
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    if let Some(every) = args.snapshot_every {
        s.snapshot_every = every;
    }
    let summary = runner::run_scenario(&s, &args.out, args.threads)?;
    let (first, last) = (summary.metrics.first(), summary.metrics.last());
    if let (Some(a), Some(b)) = (first, last) {
        println!(
            "{}: {} steps, h = {}, dt = {:e}, E {:.6} -> {:.6}, artifacts in {}",
            s.name,
            summary.steps,
            summary.bandwidth,
            summary.dt,
            a.error_l1,
            b.error_l1,
            args.out.display()
        );
    }
    Ok(true)
}

fn checked(args: CommonArgs, title: &str, body: fn(&Scenario) -> Result<Vec<Check>>) -> Result<bool> {
    let s = load(args.scenario.as_deref(), args.seed)?;
    info!("{title} on scenario `{}`", s.name);
    let checks = with_threads(args.threads, || body(&s))?;
    report(&checks, title, args.out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SWARM_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Oracle(OracleCommand::Heat(args)) => checked(args, "oracle heat", oracle_heat),
        Command::Oracle(OracleCommand::Continuity(args)) => checked(args, "oracle continuity", oracle_continuity),
        Command::Oracle(OracleCommand::Crossval(args)) => checked(args, "oracle crossval", oracle_crossval),
        Command::KdeCheck(args) => checked(args, "kde-check", kde_check),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
