//! Particle simulation against the grid continuity solver.
//!
//! Both start from the same KDE field. The swarm runs until its L1 error
//! has dropped by a factor `e`; the grid density is then evolved over the
//! same time under the discrete feedback velocity and the two fields are
//! compared.

use log::info;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::oracle::{evolve_continuity, FluxScheme};
use crate::simulator::{init_swarm, SimConfig, Simulation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossValidation {
    pub steps: usize,
    pub t: f64,
    pub error_start: f64,
    pub error_end: f64,
    /// `||f_particles - f_grid||_1 / ||f_grid||_1` at `t`.
    pub rel_l1: f64,
}

/// `sim` must have been built with metrics grid `n`; `desired` is sampled
/// onto the same grid for the continuity solver.
pub fn cross_validate(
    sim: &Simulation<'_>,
    desired: &ScalarField,
    cfg: &SimConfig,
    scheme: FluxScheme,
    max_steps: usize,
) -> Result<CrossValidation> {
    cfg.validate()?;
    let mut state = init_swarm(cfg, sim.domain())?;
    let f0 = sim.density_snapshot(&state)?;
    let (n, _) = f0.resolution();
    let target = ScalarField::from_fn(*sim.domain(), n, n, |p| desired.sample(p))?;
    let error = |f: &ScalarField| -> f64 {
        f.samples()
            .iter()
            .zip(target.samples())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * f.cell_area()
    };
    let error_start = error(&f0);
    let goal = error_start / std::f64::consts::E;
    let mut steps = 0;
    let mut current = f0.clone();
    let mut error_end = error_start;
    while error_end > goal {
        if steps == max_steps {
            return Err(Error::invalid(
                "crossval",
                format!("error did not fall by a factor e within {max_steps} steps"),
            ));
        }
        state = sim.step(&state, cfg.dt)?.state;
        steps += 1;
        current = sim.density_snapshot(&state)?;
        error_end = error(&current);
    }
    let t = steps as f64 * cfg.dt;
    let grid = evolve_continuity(&f0, &target, sim.law().diffusion(), sim.law().f_floor(), t, scheme)?;
    let diff: f64 = current
        .samples()
        .iter()
        .zip(grid.samples())
        .map(|(a, b)| (a - b).abs())
        .sum();
    let norm: f64 = grid.samples().iter().map(|v| v.abs()).sum();
    info!("crossval: {steps} steps to t = {t}, E {error_start:.4} -> {error_end:.4}");
    Ok(CrossValidation {
        steps,
        t,
        error_start,
        error_end,
        rel_l1: diff / norm,
    })
}
