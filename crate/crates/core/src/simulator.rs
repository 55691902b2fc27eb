//! Agent kinematics under the synthesized velocity field.
//!
//! Every step freezes one estimation epoch: all agents read the same
//! swarm snapshot, compute their velocities, and only then move (explicit
//! Euler followed by mirror reflection at the walls).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::controller::{density_error, ControlLaw};
use crate::error::{Error, Result};
use crate::field::{Domain, ScalarField};
use crate::kde::{BoundaryCorrection, Estimator, Method, SwarmState};
use crate::kernels::Kernel;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Reflect,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDistribution {
    Uniform,
    /// Isotropic normal, redrawn until inside the domain.
    Gaussian {
        mean: Vec2,
        std: f64,
    },
    /// Explicit positions, e.g. loaded from a file.
    Positions(Vec<Vec2>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub boundary: Boundary,
    pub init: InitialDistribution,
    /// Metrics are recorded every this many steps, and at the final step.
    pub metrics_every: usize,
    /// Side of the square metrics grid.
    pub metrics_resolution: usize,
    /// Density snapshots every this many steps (and at the final step); 0 disables.
    pub snapshot_every: usize,
}

/// Default metrics grid side.
pub const DEFAULT_METRICS_RESOLUTION: usize = 64;

/// Default explicit time step `0.1 h^2 / D`.
pub fn default_time_step(h: f64, diffusion: f64) -> f64 {
    0.1 * h * h / diffusion
}

impl SimConfig {
    pub fn new(n: usize, dt: f64, t_final: f64, seed: u64) -> Self {
        SimConfig {
            n,
            dt,
            t_final,
            seed,
            boundary: Boundary::Reflect,
            init: InitialDistribution::Uniform,
            metrics_every: 10,
            metrics_resolution: DEFAULT_METRICS_RESOLUTION,
            snapshot_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("sim.N", "need at least one agent"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("sim.dt", "must be positive and finite"));
        }
        if !(self.t_final == 0.0 || (self.t_final >= self.dt && self.t_final.is_finite())) {
            return Err(Error::invalid("sim.T", "must be zero or at least one time step"));
        }
        if self.metrics_every == 0 {
            return Err(Error::invalid("metrics.every", "must be at least 1"));
        }
        if self.metrics_resolution == 0 {
            return Err(Error::invalid("metrics.grid", "must be at least 1"));
        }
        if let InitialDistribution::Gaussian { std, .. } = self.init {
            if !(std > 0.0 && std.is_finite()) {
                return Err(Error::invalid("sim.init_std", "must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Number of Euler steps: `T / dt` rounded to the nearest integer.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub t: f64,
    /// `int |f_hat - f_desired|` over the domain.
    pub error_l1: f64,
    /// `1/2 int |grad(f_hat - f_desired)|^2`.
    pub lyapunov: f64,
    /// `int (f_hat - f_desired)`.
    pub mass_defect: f64,
    pub mean_speed: f64,
}

/// Mirror-reflects `x` back into `domain`, axis by axis.
///
/// An overshoot of more than one domain extent means the step was far too
/// large and is reported instead of folded back.
pub fn reflect_boundary(x: Vec2, domain: &Domain) -> Result<Vec2> {
    let lo = domain.lower();
    let hi = domain.upper();
    let size = domain.size();
    let mut out = x;
    for axis in 0..2 {
        let (a, b, extent) = (lo[axis], hi[axis], size[axis]);
        let mut v = out[axis];
        if !v.is_finite() {
            return Err(Error::invalid("position", "non-finite coordinate"));
        }
        let overshoot = (a - v).max(v - b);
        if overshoot > extent {
            return Err(Error::Overshoot { overshoot, extent });
        }
        while v < a || v > b {
            if v < a {
                v = 2.0 * a - v;
            } else {
                v = 2.0 * b - v;
            }
        }
        out[axis] = v;
    }
    Ok(out)
}

pub fn init_swarm(cfg: &SimConfig, domain: &Domain) -> Result<SwarmState> {
    if cfg.n == 0 {
        return Err(Error::invalid("sim.N", "need at least one agent"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lo = domain.lower();
    let size = domain.size();
    let positions = match &cfg.init {
        InitialDistribution::Uniform => (0..cfg.n)
            .map(|_| {
                let ux: f64 = rng.random();
                let uy: f64 = rng.random();
                lo + Vec2::new(ux * size.x, uy * size.y)
            })
            .collect(),
        InitialDistribution::Gaussian { mean, std } => {
            let nx = Normal::new(mean.x, *std).map_err(|e| Error::invalid("sim.init_std", e.to_string()))?;
            let ny = Normal::new(mean.y, *std).map_err(|e| Error::invalid("sim.init_std", e.to_string()))?;
            let budget = 1000 * cfg.n;
            let mut out = Vec::with_capacity(cfg.n);
            let mut draws = 0;
            while out.len() < cfg.n {
                if draws == budget {
                    return Err(Error::invalid(
                        "sim.init_mean",
                        "gaussian initial distribution puts almost no mass inside the domain",
                    ));
                }
                draws += 1;
                let p = Vec2::new(nx.sample(&mut rng), ny.sample(&mut rng));
                if domain.contains(p) {
                    out.push(p);
                }
            }
            out
        }
        InitialDistribution::Positions(p) => {
            if p.len() != cfg.n {
                return Err(Error::invalid(
                    "sim.init_file",
                    format!("expected {} positions, found {}", cfg.n, p.len()),
                ));
            }
            if let Some(bad) = p.iter().position(|q| !domain.contains(*q)) {
                return Err(Error::invalid(
                    "sim.init_file",
                    format!("position {bad} lies outside the domain"),
                ));
            }
            p.clone()
        }
    };
    SwarmState::new(positions, 0.0)
}

/// Result of one Euler step: the new state and the velocities that produced it.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SwarmState,
    pub velocities: Vec<Vec2>,
}

/// What the run loop shows an observer at each step, before moving.
pub struct Frame<'a> {
    pub step: usize,
    pub state: &'a SwarmState,
    pub velocities: &'a [Vec2],
    pub metrics: Option<&'a MetricsRecord>,
    pub snapshot: Option<&'a ScalarField>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: SwarmState,
    pub metrics: Vec<MetricsRecord>,
    /// `(step, t, KDE field on the metrics grid)`.
    pub snapshots: Vec<(usize, f64, ScalarField)>,
}

/// The closed loop: kernel, bandwidth, control law and commanded density.
pub struct Simulation<'a> {
    domain: Domain,
    kernel: &'a Kernel,
    h: f64,
    law: ControlLaw,
    desired: &'a ScalarField,
    method: Method,
    correction: BoundaryCorrection,
    probes: MetricsGrid,
}

struct MetricsGrid {
    n: usize,
    points: Vec<Vec2>,
    desired_value: Vec<f64>,
    desired_gradient: Vec<Vec2>,
    cell_area: f64,
}

impl MetricsGrid {
    fn new(domain: Domain, n: usize, desired: &ScalarField) -> Result<Self> {
        let layout = ScalarField::constant(domain, n, n, 0.0)?;
        let points: Vec<Vec2> = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .map(|(i, j)| layout.cell_center(i, j))
            .collect();
        Ok(MetricsGrid {
            n,
            desired_value: points.iter().map(|&p| desired.sample(p)).collect(),
            desired_gradient: points.iter().map(|&p| desired.gradient(p)).collect(),
            points,
            cell_area: layout.cell_area(),
        })
    }
}

impl<'a> Simulation<'a> {
    pub fn new(
        domain: Domain,
        kernel: &'a Kernel,
        h: f64,
        law: ControlLaw,
        desired: &'a ScalarField,
        metrics_resolution: usize,
    ) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("bandwidth.h", "must be positive and finite"));
        }
        let method = if kernel.support_radius().is_some() {
            Method::Grid
        } else {
            Method::Brute
        };
        Ok(Simulation {
            domain,
            kernel,
            h,
            law,
            desired,
            method,
            correction: BoundaryCorrection::Reflection,
            probes: MetricsGrid::new(domain, metrics_resolution.max(1), desired)?,
        })
    }

    /// Wall treatment of the estimator; mirror images by default.
    pub fn with_boundary_correction(mut self, correction: BoundaryCorrection) -> Self {
        self.correction = correction;
        self
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn law(&self) -> &ControlLaw {
        &self.law
    }

    fn estimator<'s>(&'s self, state: &'s SwarmState) -> Result<Estimator<'s>> {
        Ok(Estimator::new(state, self.kernel, self.h, self.method)?.with_correction(self.correction, self.domain))
    }

    /// Velocity of every agent from one frozen estimation epoch.
    pub fn velocities(&self, state: &SwarmState) -> Result<Vec<Vec2>> {
        let est = self.estimator(state)?;
        Ok(self.velocities_with(&est, state))
    }

    fn velocities_with(&self, est: &Estimator<'_>, state: &SwarmState) -> Vec<Vec2> {
        state
            .positions()
            .par_iter()
            .map(|&x| self.law.agent_velocity(&est.estimate(x), self.desired, x))
            .collect()
    }

    /// Moves every agent by `dt * v` and reflects at the walls.
    pub fn advance(&self, state: &SwarmState, velocities: &[Vec2], dt: f64, time: f64) -> Result<SwarmState> {
        let mut next = Vec::with_capacity(state.len());
        for (agent, (&r, &v)) in state.positions().iter().zip(velocities).enumerate() {
            let moved = r + v * dt;
            if !(moved.x.is_finite() && moved.y.is_finite()) {
                return Err(Error::NonFinitePosition { agent, time });
            }
            next.push(reflect_boundary(moved, &self.domain)?);
        }
        SwarmState::new(next, time)
    }

    pub fn step(&self, state: &SwarmState, dt: f64) -> Result<StepOutcome> {
        let velocities = self.velocities(state)?;
        let state = self.advance(state, &velocities, dt, state.time() + dt)?;
        Ok(StepOutcome { state, velocities })
    }

    /// KDE field of `state` sampled on the metrics grid.
    pub fn density_snapshot(&self, state: &SwarmState) -> Result<ScalarField> {
        let est = self.estimator(state)?;
        let values = est.estimate_many(&self.probes.points).iter().map(|e| e.value).collect();
        let n = self.probes.n;
        ScalarField::new(self.domain, n, n, values)
    }

    /// Metrics of `state`; `velocities` feed the mean speed.
    pub fn metrics(&self, state: &SwarmState, velocities: &[Vec2]) -> Result<MetricsRecord> {
        let est = self.estimator(state)?;
        Ok(self.metrics_with(&est, state, velocities).0)
    }

    fn metrics_with(&self, est: &Estimator<'_>, state: &SwarmState, velocities: &[Vec2]) -> (MetricsRecord, Vec<f64>) {
        let p = &self.probes;
        let estimates = est.estimate_many(&p.points);
        let (mut l1, mut lyap, mut mass) = (0.0, 0.0, 0.0);
        for (k, e) in estimates.iter().enumerate() {
            let phi = e.value - p.desired_value[k];
            let grad = e.gradient - p.desired_gradient[k];
            l1 += phi.abs();
            mass += phi;
            lyap += grad.norm_squared();
        }
        let mean_speed = velocities.iter().map(|v| v.norm()).sum::<f64>() / velocities.len().max(1) as f64;
        let record = MetricsRecord {
            t: state.time(),
            error_l1: l1 * p.cell_area,
            lyapunov: 0.5 * lyap * p.cell_area,
            mass_defect: mass * p.cell_area,
            mean_speed,
        };
        (record, estimates.iter().map(|e| e.value).collect())
    }

    /// Integrates from `initial` to `cfg.t_final`, calling `observer` once per
    /// step (including step 0 and the final step) before agents move.
    pub fn run(
        &self,
        cfg: &SimConfig,
        initial: SwarmState,
        mut observer: impl FnMut(&Frame<'_>) -> Result<()>,
    ) -> Result<RunOutput> {
        cfg.validate()?;
        let steps = cfg.steps();
        let mut state = initial;
        let mut metrics = Vec::new();
        let mut snapshots = Vec::new();
        for k in 0..=steps {
            let est = self.estimator(&state)?;
            let velocities = self.velocities_with(&est, &state);
            let last = k == steps;
            let want_metrics = last || k % cfg.metrics_every == 0;
            let want_snapshot = cfg.snapshot_every > 0 && (last || k % cfg.snapshot_every == 0);
            let mut record = None;
            let mut snapshot = None;
            if want_metrics || want_snapshot {
                let (m, values) = self.metrics_with(&est, &state, &velocities);
                if want_metrics {
                    metrics.push(m);
                    record = Some(m);
                }
                if want_snapshot {
                    let n = self.probes.n;
                    snapshot = Some(ScalarField::new(self.domain, n, n, values)?);
                }
            }
            observer(&Frame {
                step: k,
                state: &state,
                velocities: &velocities,
                metrics: record.as_ref(),
                snapshot: snapshot.as_ref(),
            })?;
            if let Some(s) = snapshot {
                snapshots.push((k, state.time(), s));
            }
            if last {
                break;
            }
            drop(est);
            state = self.advance(&state, &velocities, cfg.dt, (k + 1) as f64 * cfg.dt)?;
        }
        Ok(RunOutput {
            final_state: state,
            metrics,
            snapshots,
        })
    }
}

/// Mean density error magnitude at the agents, `mean_i |phi(r_i)|`.
pub fn mean_agent_error(sim: &Simulation<'_>, state: &SwarmState) -> Result<f64> {
    let est = sim.estimator(state)?;
    let total: f64 = state
        .positions()
        .iter()
        .map(|&x| density_error(&est.estimate(x), sim.desired, x).phi.abs())
        .sum();
    Ok(total / state.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Domain {
        Domain::unit_square()
    }

    #[test]
    fn reflection_examples() {
        let d = unit();
        assert_eq!(reflect_boundary(Vec2::new(0.3, 0.7), &d).unwrap(), Vec2::new(0.3, 0.7));
        assert_eq!(reflect_boundary(Vec2::new(1.0, 0.0), &d).unwrap(), Vec2::new(1.0, 0.0));
        let r = reflect_boundary(Vec2::new(1.1, 0.5), &d).unwrap();
        assert!((r - Vec2::new(0.9, 0.5)).norm() < 1e-15);
        let c = reflect_boundary(Vec2::new(1.1, -0.2), &d).unwrap();
        assert!((c - Vec2::new(0.9, 0.2)).norm() < 1e-15);
        assert!(matches!(
            reflect_boundary(Vec2::new(2.5, 0.5), &d),
            Err(Error::Overshoot { .. })
        ));
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let cfg = SimConfig::new(100, 1e-3, 0.0, 42);
        let a = init_swarm(&cfg, &unit()).unwrap();
        let b = init_swarm(&cfg, &unit()).unwrap();
        assert_eq!(a, b);
        let other = init_swarm(&SimConfig { seed: 43, ..cfg }, &unit()).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn uniform_init_mean() {
        let n = 10_000;
        let d = Domain::square(2.0).unwrap();
        let s = init_swarm(&SimConfig::new(n, 1e-3, 0.0, 7), &d).unwrap();
        let mean = s.positions().iter().fold(Vec2::zeros(), |a, p| a + p) / n as f64;
        let sigma = 2.0 / (12.0 * n as f64).sqrt();
        assert!((mean.x - 1.0).abs() < 3.0 * sigma);
        assert!((mean.y - 1.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn gaussian_init_stays_inside() {
        let mut cfg = SimConfig::new(2000, 1e-3, 0.0, 1);
        cfg.init = InitialDistribution::Gaussian {
            mean: Vec2::new(0.9, 0.1),
            std: 0.3,
        };
        let s = init_swarm(&cfg, &unit()).unwrap();
        assert!(s.positions().iter().all(|p| unit().contains(*p)));
        cfg.init = InitialDistribution::Gaussian {
            mean: Vec2::new(50.0, 50.0),
            std: 0.01,
        };
        assert!(init_swarm(&cfg, &unit()).is_err());
    }

    #[test]
    fn explicit_positions_need_the_right_count() {
        let mut cfg = SimConfig::new(3, 1e-3, 0.0, 1);
        cfg.init = InitialDistribution::Positions(vec![Vec2::new(0.5, 0.5); 2]);
        assert!(init_swarm(&cfg, &unit()).is_err());
        cfg.init = InitialDistribution::Positions(vec![Vec2::new(0.5, 0.5); 3]);
        assert_eq!(init_swarm(&cfg, &unit()).unwrap().len(), 3);
    }

    fn uniform_setup() -> (Kernel, ScalarField) {
        (
            Kernel::gaussian(2).unwrap(),
            ScalarField::uniform(unit(), 16, 16).unwrap(),
        )
    }

    #[test]
    fn lone_agent_is_stationary() {
        let (k, desired) = uniform_setup();
        let law = ControlLaw::new(5.0, 0.01).unwrap();
        let sim = Simulation::new(unit(), &k, 0.05, law, &desired, 8).unwrap();
        let s = SwarmState::new(vec![Vec2::new(0.5, 0.5)], 0.0).unwrap();
        let out = sim.step(&s, 1e-4).unwrap();
        assert_eq!(out.velocities[0], Vec2::zeros());
        assert_eq!(out.state.positions()[0], Vec2::new(0.5, 0.5));
    }

    #[test]
    fn pair_at_one_bandwidth_separates() {
        let (k, desired) = uniform_setup();
        let law = ControlLaw::new(5.0, 0.01).unwrap();
        let h = 0.05;
        let sim = Simulation::new(unit(), &k, h, law, &desired, 8).unwrap();
        let a = Vec2::new(0.5 - h / 2.0, 0.5);
        let b = Vec2::new(0.5 + h / 2.0, 0.5);
        let s = SwarmState::new(vec![a, b], 0.0).unwrap();
        let out = sim.step(&s, 1e-5).unwrap();
        let (na, nb) = (out.state.positions()[0], out.state.positions()[1]);
        assert!(out.velocities[0].x < 0.0 && out.velocities[1].x > 0.0);
        assert!((nb - na).norm() > h);
        // Motion stays on the connecting line.
        assert_eq!(na.y, 0.5);
        assert_eq!(nb.y, 0.5);
    }

    #[test]
    fn zero_error_field_means_no_motion() {
        // Desired field = the swarm's own KDE sampled on a grid whose centers
        // hold the agents, so phi and grad(phi) vanish at every agent.
        let k = Kernel::gaussian(2).unwrap();
        let h = 0.05;
        let layout = ScalarField::constant(unit(), 64, 64, 0.0).unwrap();
        let s = SwarmState::new(vec![layout.cell_center(20, 32), layout.cell_center(44, 32)], 0.0).unwrap();
        let est = Estimator::new(&s, &k, h, Method::Grid).unwrap();
        let desired = ScalarField::from_fn(unit(), 64, 64, |p| est.estimate(p).value).unwrap();
        let law = ControlLaw::new(5.0, 0.01).unwrap();
        let sim = Simulation::new(unit(), &k, h, law, &desired, 8).unwrap();
        let out = sim.step(&s, 1e-4).unwrap();
        for (p, q) in s.positions().iter().zip(out.state.positions()) {
            assert!((p - q).norm() < 1e-12, "{p:?} -> {q:?}");
        }
    }

    #[test]
    fn zero_duration_run() {
        let (k, desired) = uniform_setup();
        let law = ControlLaw::new(5.0, 0.01).unwrap();
        let sim = Simulation::new(unit(), &k, 0.05, law, &desired, 16).unwrap();
        let cfg = SimConfig::new(50, 1e-4, 0.0, 3);
        let init = init_swarm(&cfg, &unit()).unwrap();
        let out = sim.run(&cfg, init.clone(), |_| Ok(())).unwrap();
        assert_eq!(out.final_state, init);
        assert_eq!(out.metrics.len(), 1);
        assert_eq!(out.metrics[0].t, 0.0);
    }

    #[test]
    fn oversized_step_aborts() {
        let (k, desired) = uniform_setup();
        let law = ControlLaw::new(5.0, 0.01).unwrap();
        let h = 0.05;
        let sim = Simulation::new(unit(), &k, h, law, &desired, 8).unwrap();
        let s = SwarmState::new(vec![Vec2::new(0.5, 0.5), Vec2::new(0.5 + 0.3 * h, 0.5)], 0.0).unwrap();
        let dt = 1e3 * default_time_step(h, 5.0);
        assert!(matches!(sim.step(&s, dt), Err(Error::Overshoot { .. })));
        let blown = [Vec2::new(f64::INFINITY, 0.0), Vec2::zeros()];
        assert!(matches!(
            sim.advance(&s, &blown, dt, dt),
            Err(Error::NonFinitePosition { agent: 0, .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0, 1e-3, 1.0, 0).validate().is_err());
        assert!(SimConfig::new(10, 0.0, 1.0, 0).validate().is_err());
        assert!(SimConfig::new(10, 1e-3, 1e-4, 0).validate().is_err());
        assert!(SimConfig::new(10, 1e-3, 0.0, 0).validate().is_ok());
        assert_eq!(SimConfig::new(10, 1e-3, 0.25, 0).steps(), 250);
    }
}
