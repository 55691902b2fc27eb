//! Runs a scenario and writes its artifacts.
//!
//! Layout of the output directory:
//!
//! - `manifest.scn`: the resolved scenario; running it again reproduces
//!   the metrics byte for byte.
//! - `metrics.csv`: `t,E,V_hat,mass_defect,mean_speed`.
//! - `trajectory.csv`: `t,agent_id,x,y,vx,vy`, every
//!   `output.trajectory_every` steps and at the final step.
//! - `desired.pgm`, `snapshots/step_NNNNNN.pgm`: fields as 8-bit PGM with
//!   a `.txt` sidecar holding the value range.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{debug, info};

use crate::controller::ControlLaw;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::kde::SwarmState;
use crate::kernels::{BandwidthPolicy, Kernel};
use crate::pgm::write_snapshot;
use crate::scenario::Scenario;
use crate::simulator::{init_swarm, Frame, MetricsRecord, SimConfig, Simulation};

pub const MANIFEST: &str = "manifest.scn";
pub const METRICS: &str = "metrics.csv";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const DESIRED: &str = "desired.pgm";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub bandwidth: f64,
    pub dt: f64,
    pub metrics: Vec<MetricsRecord>,
    pub snapshots: Vec<PathBuf>,
}

/// Runs `body` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, body: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => body(),
        Some(0) => Err(Error::invalid("threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?
            .install(body),
    }
}

pub fn metrics_row(m: &MetricsRecord) -> String {
    format!(
        "{:?},{:?},{:?},{:?},{:?}",
        m.t, m.error_l1, m.lyapunov, m.mass_defect, m.mean_speed
    )
}

pub fn run_scenario(scenario: &Scenario, out_dir: &Path, threads: Option<usize>) -> Result<RunSummary> {
    with_threads(threads, || run_in_pool(scenario, out_dir))
}

/// Everything a scenario resolves to before the first step.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub kernel: Kernel,
    pub desired: ScalarField,
    pub law: ControlLaw,
    pub initial: SwarmState,
    pub bandwidth: f64,
    pub config: SimConfig,
}

pub fn prepare(scenario: &Scenario) -> Result<Prepared> {
    let kernel = scenario.kernel()?;
    let desired = scenario.desired_field()?;
    let law = scenario.control_law()?;

    // A data-driven bandwidth needs the initial swarm, and the default
    // step needs the bandwidth, so the swarm is drawn first.
    let mut draw = SimConfig::new(scenario.n, 1.0, 0.0, scenario.seed);
    draw.init = scenario.initial_distribution()?;
    let initial = init_swarm(&draw, &scenario.domain)?;
    let policy = scenario.bandwidth_policy(initial.positions());
    if let BandwidthPolicy::RuleOfThumb { sigma_hat, .. } = policy {
        debug!("rule-of-thumb bandwidth from sigma_hat = {sigma_hat}");
    }
    let bandwidth = policy.select_for(&kernel, scenario.n)?;
    let config = scenario.sim_config(bandwidth)?;
    Ok(Prepared {
        kernel,
        desired,
        law,
        initial,
        bandwidth,
        config,
    })
}

impl Prepared {
    pub fn simulation(&self, scenario: &Scenario) -> Result<Simulation<'_>> {
        Ok(Simulation::new(
            scenario.domain,
            &self.kernel,
            self.bandwidth,
            self.law,
            &self.desired,
            self.config.metrics_resolution,
        )?
        .with_boundary_correction(scenario.kde_boundary))
    }
}

fn run_in_pool(scenario: &Scenario, out_dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;
    let prepared = prepare(scenario)?;
    let (h, desired) = (prepared.bandwidth, &prepared.desired);
    let cfg = prepared.config.clone();

    let mut resolved = scenario.clone();
    resolved.dt = Some(cfg.dt);
    resolved.t_final = Some(cfg.t_final);
    std::fs::write(out_dir.join(MANIFEST), resolved.render()?)?;
    write_snapshot(desired, out_dir.join(DESIRED))?;
    info!(
        "scenario `{}`: N = {}, h = {h}, dt = {}, T = {}, {} steps",
        scenario.name,
        cfg.n,
        cfg.dt,
        cfg.t_final,
        cfg.steps()
    );

    let sim = prepared.simulation(scenario)?;

    let mut metrics_out = BufWriter::new(File::create(out_dir.join(METRICS))?);
    writeln!(metrics_out, "t,E,V_hat,mass_defect,mean_speed")?;
    let mut traj_out = BufWriter::new(File::create(out_dir.join(TRAJECTORY))?);
    writeln!(traj_out, "t,agent_id,x,y,vx,vy")?;
    let snap_dir = out_dir.join(SNAPSHOT_DIR);
    if cfg.snapshot_every > 0 {
        std::fs::create_dir_all(&snap_dir)?;
    }
    let steps = cfg.steps();
    let every = scenario.trajectory_every;
    let mut snapshot_paths = Vec::new();

    let output = sim.run(&cfg, prepared.initial.clone(), |frame: &Frame<'_>| {
        if let Some(m) = frame.metrics {
            writeln!(metrics_out, "{}", metrics_row(m))?;
            debug!(
                "t = {:.6} E = {:.6} mass defect = {:.3e}",
                m.t, m.error_l1, m.mass_defect
            );
        }
        if every > 0 && (frame.step.is_multiple_of(every) || frame.step == steps) {
            let t = frame.state.time();
            for (i, (r, v)) in frame.state.positions().iter().zip(frame.velocities).enumerate() {
                writeln!(traj_out, "{t:?},{i},{:?},{:?},{:?},{:?}", r.x, r.y, v.x, v.y)?;
            }
        }
        if let Some(field) = frame.snapshot {
            let path = snap_dir.join(format!("step_{:06}.pgm", frame.step));
            write_snapshot(field, &path)?;
            snapshot_paths.push(path);
        }
        Ok(())
    })?;
    metrics_out.flush()?;
    traj_out.flush()?;
    if let (Some(first), Some(last)) = (output.metrics.first(), output.metrics.last()) {
        info!("E: {:.6} -> {:.6}", first.error_l1, last.error_l1);
    }
    Ok(RunSummary {
        steps,
        bandwidth: h,
        dt: cfg.dt,
        metrics: output.metrics,
        snapshots: snapshot_paths,
    })
}
