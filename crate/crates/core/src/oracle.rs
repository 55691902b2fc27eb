//! Grid solvers used to check the particle method without particles.
//!
//! `heat_step` advances `d(phi)/dt = D lap(phi)` with an explicit 5-point
//! Laplacian and mirrored ghost cells (zero normal gradient). The
//! continuity solver advances `df/dt = -div(v f)` in flux form with
//! velocities on cell faces and zero flux through the walls. Both act on
//! the cell-centered samples of a [`ScalarField`].

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Domain, ScalarField};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSolverConfig {
    n: usize,
    dt: f64,
    diffusion: f64,
    domain: Domain,
}

impl GridSolverConfig {
    /// Rejects time steps above the explicit bound
    /// `dt <= 1 / (2 D (1/dx^2 + 1/dy^2))` (`0.25 dx^2 / D` on square cells).
    pub fn new(domain: Domain, n: usize, dt: f64, diffusion: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("oracle.n", "must be at least 1"));
        }
        if !(diffusion > 0.0 && diffusion.is_finite()) {
            return Err(Error::invalid("oracle.D", "must be positive and finite"));
        }
        let limit = Self::stable_dt(domain, n, diffusion);
        if !(dt > 0.0 && dt <= limit) {
            return Err(Error::Stability(format!(
                "dt = {dt:e} outside (0, {limit:e}] for n = {n}, D = {diffusion}"
            )));
        }
        Ok(GridSolverConfig {
            n,
            dt,
            diffusion,
            domain,
        })
    }

    /// Largest stable explicit time step.
    pub fn stable_dt(domain: Domain, n: usize, diffusion: f64) -> f64 {
        let dx = domain.size().x / n as f64;
        let dy = domain.size().y / n as f64;
        1.0 / (2.0 * diffusion * (1.0 / (dx * dx) + 1.0 / (dy * dy)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
}

fn check_grid(field: &ScalarField, cfg: &GridSolverConfig) -> Result<()> {
    if field.resolution() != (cfg.n, cfg.n) || *field.domain() != cfg.domain {
        return Err(Error::invalid("field", "grid does not match the solver configuration"));
    }
    Ok(())
}

/// Neumann-mirrored neighbour lookup.
#[inline]
fn at(samples: &[f64], nx: usize, ny: usize, i: isize, j: isize) -> f64 {
    let i = i.clamp(0, nx as isize - 1) as usize;
    let j = j.clamp(0, ny as isize - 1) as usize;
    samples[j * nx + i]
}

pub fn heat_step(phi: &ScalarField, cfg: &GridSolverConfig) -> Result<ScalarField> {
    check_grid(phi, cfg)?;
    let (nx, ny) = phi.resolution();
    let c = phi.cell_size();
    let ax = cfg.diffusion * cfg.dt / (c.x * c.x);
    let ay = cfg.diffusion * cfg.dt / (c.y * c.y);
    let src = phi.samples();
    let mut out = vec![0.0; nx * ny];
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        let j = j as isize;
        for (i, cell) in row.iter_mut().enumerate() {
            let i = i as isize;
            let v = at(src, nx, ny, i, j);
            let lx = at(src, nx, ny, i - 1, j) - 2.0 * v + at(src, nx, ny, i + 1, j);
            let ly = at(src, nx, ny, i, j - 1) - 2.0 * v + at(src, nx, ny, i, j + 1);
            *cell = v + ax * lx + ay * ly;
        }
    });
    ScalarField::new(*phi.domain(), nx, ny, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxScheme {
    Upwind,
    Central,
}

/// Normal velocities on cell faces.
///
/// `x[j * (nx + 1) + i]` sits on the face left of cell `(i, j)`;
/// `y[j * nx + i]` on the face below it. Wall faces are ignored by the
/// solver.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceVelocity {
    nx: usize,
    ny: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FaceVelocity {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        FaceVelocity {
            nx,
            ny,
            x: vec![0.0; (nx + 1) * ny],
            y: vec![0.0; nx * (ny + 1)],
        }
    }

    /// Samples a velocity function at face centers of `layout`'s grid.
    pub fn from_fn(layout: &ScalarField, v: impl Fn(Vec2) -> Vec2) -> Self {
        let (nx, ny) = layout.resolution();
        let c = layout.cell_size();
        let lo = layout.domain().lower();
        let mut out = Self::zeros(nx, ny);
        for j in 0..ny {
            for i in 0..=nx {
                let p = lo + Vec2::new(i as f64 * c.x, (j as f64 + 0.5) * c.y);
                out.x[j * (nx + 1) + i] = v(p).x;
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                let p = lo + Vec2::new((i as f64 + 0.5) * c.x, j as f64 * c.y);
                out.y[j * nx + i] = v(p).y;
            }
        }
        out
    }

    /// Discrete feedback velocity `-D grad(f - f_desired) / max(f, floor)` with
    /// the gradient as a two-point difference across each face and `f` as the
    /// face average.
    pub fn heat_law(f: &ScalarField, desired: &ScalarField, diffusion: f64, floor: f64) -> Result<Self> {
        if f.resolution() != desired.resolution() {
            return Err(Error::invalid("desired", "grid does not match"));
        }
        let (nx, ny) = f.resolution();
        let c = f.cell_size();
        let fs = f.samples();
        let ds = desired.samples();
        let phi = |k: usize| fs[k] - ds[k];
        let mut out = Self::zeros(nx, ny);
        for j in 0..ny {
            for i in 1..nx {
                let (l, r) = (j * nx + i - 1, j * nx + i);
                let face = 0.5 * (fs[l] + fs[r]);
                out.x[j * (nx + 1) + i] = -diffusion * (phi(r) - phi(l)) / c.x / face.max(floor);
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let (b, t) = ((j - 1) * nx + i, j * nx + i);
                let face = 0.5 * (fs[b] + fs[t]);
                out.y[j * nx + i] = -diffusion * (phi(t) - phi(b)) / c.y / face.max(floor);
            }
        }
        Ok(out)
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Largest normal speed over interior faces.
    pub fn max_speed(&self) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let mut m = 0.0f64;
        for j in 0..ny {
            for i in 1..nx {
                m = m.max(self.x[j * (nx + 1) + i].abs());
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                m = m.max(self.y[j * nx + i].abs());
            }
        }
        m
    }
}

#[inline]
fn flux(u: f64, left: f64, right: f64, scheme: FluxScheme) -> f64 {
    match scheme {
        FluxScheme::Upwind => {
            if u > 0.0 {
                u * left
            } else {
                u * right
            }
        }
        FluxScheme::Central => 0.5 * u * (left + right),
    }
}

/// One conservative step of `df/dt = -div(v f)`.
///
/// Requires `max|v| dt <= 0.5 min(dx, dy)`.
pub fn continuity_step(f: &ScalarField, v: &FaceVelocity, dt: f64, scheme: FluxScheme) -> Result<ScalarField> {
    let (nx, ny) = f.resolution();
    if v.resolution() != (nx, ny) {
        return Err(Error::invalid("velocity", "face grid does not match the field"));
    }
    let c = f.cell_size();
    let limit = 0.5 * c.x.min(c.y);
    let courant = v.max_speed() * dt;
    if !(dt > 0.0 && courant <= limit) {
        return Err(Error::Stability(format!(
            "CFL violated: max|v| dt = {courant:e} exceeds {limit:e}"
        )));
    }
    let s = f.samples();
    let fx = |i: usize, j: usize| -> f64 {
        if i == 0 || i == nx {
            0.0
        } else {
            flux(v.x[j * (nx + 1) + i], s[j * nx + i - 1], s[j * nx + i], scheme)
        }
    };
    let fy = |i: usize, j: usize| -> f64 {
        if j == 0 || j == ny {
            0.0
        } else {
            flux(v.y[j * nx + i], s[(j - 1) * nx + i], s[j * nx + i], scheme)
        }
    };
    let (rx, ry) = (dt / c.x, dt / c.y);
    let mut out = vec![0.0; nx * ny];
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, cell) in row.iter_mut().enumerate() {
            *cell = s[j * nx + i] - rx * (fx(i + 1, j) - fx(i, j)) - ry * (fy(i, j + 1) - fy(i, j));
        }
    });
    ScalarField::new(*f.domain(), nx, ny, out)
}

/// `V = 1/2 int |grad(phi)|^2`, from differences across interior cell
/// faces (walls carry no gradient). This is the energy the 5-point scheme
/// dissipates, so it cannot grow under a stable [`heat_step`].
pub fn lyapunov(phi: &ScalarField) -> f64 {
    let (nx, ny) = phi.resolution();
    let c = phi.cell_size();
    let s = phi.samples();
    let mut total = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let v = s[j * nx + i];
            if i + 1 < nx {
                let gx = (s[j * nx + i + 1] - v) / c.x;
                total += gx * gx;
            }
            if j + 1 < ny {
                let gy = (s[(j + 1) * nx + i] - v) / c.y;
                total += gy * gy;
            }
        }
    }
    0.5 * total * phi.cell_area()
}

/// Runs `steps` heat steps, returning the final field and `V` before the
/// first step and after each one.
pub fn heat_run(phi: &ScalarField, cfg: &GridSolverConfig, steps: usize) -> Result<(ScalarField, Vec<f64>)> {
    let mut cur = phi.clone();
    let mut trace = Vec::with_capacity(steps + 1);
    trace.push(lyapunov(&cur));
    for _ in 0..steps {
        cur = heat_step(&cur, cfg)?;
        trace.push(lyapunov(&cur));
    }
    Ok((cur, trace))
}

/// Outcome of evolving the first cosine eigenmode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenmodeReport {
    pub n: usize,
    pub steps: usize,
    pub t: f64,
    /// Projected amplitude at `t`, relative to the start.
    pub measured: f64,
    /// `exp(-D (pi/L)^2 t)`.
    pub predicted: f64,
    pub rel_error: f64,
}

/// Evolves `phi = cos(pi (x - x0) / L)` on an `n x n` grid of `domain` for
/// `t` (default: one e-folding time `L^2 / (D pi^2)`), at 80% of the
/// stable step.
pub fn eigenmode_decay(domain: Domain, n: usize, diffusion: f64, t: Option<f64>) -> Result<EigenmodeReport> {
    let l = domain.size().x;
    let k = PI / l;
    let t = t.unwrap_or(1.0 / (diffusion * k * k));
    let dt_max = 0.8 * GridSolverConfig::stable_dt(domain, n, diffusion);
    let steps = (t / dt_max).ceil().max(1.0) as usize;
    let cfg = GridSolverConfig::new(domain, n, t / steps as f64, diffusion)?;
    let x0 = domain.lower().x;
    let mode = ScalarField::from_fn(domain, n, n, |p| (k * (p.x - x0)).cos())?;
    let norm: f64 = mode.samples().iter().map(|m| m * m).sum();
    let amplitude =
        |f: &ScalarField| -> f64 { f.samples().iter().zip(mode.samples()).map(|(a, b)| a * b).sum::<f64>() / norm };
    let mut phi = mode.clone();
    for _ in 0..steps {
        phi = heat_step(&phi, &cfg)?;
    }
    let measured = amplitude(&phi);
    let predicted = (-diffusion * k * k * t).exp();
    Ok(EigenmodeReport {
        n,
        steps,
        t,
        measured,
        predicted,
        rel_error: (measured - predicted).abs() / predicted,
    })
}

pub type ScalarFn = fn(Vec2) -> f64;
pub type VectorFn = fn(Vec2) -> Vec2;

/// Smooth zero-flux test densities on the unit square, both of unit mass:
/// `(f, grad f, f_desired, grad f_desired)`.
pub fn analytic_pair() -> (ScalarFn, VectorFn, ScalarFn, VectorFn) {
    let f = |p: Vec2| 1.0 + 0.5 * (PI * p.x).cos() * (PI * p.y).cos();
    let grad_f = |p: Vec2| {
        Vec2::new(
            -0.5 * PI * (PI * p.x).sin() * (PI * p.y).cos(),
            -0.5 * PI * (PI * p.x).cos() * (PI * p.y).sin(),
        )
    };
    let fd = |p: Vec2| 1.0 + 0.4 * (2.0 * PI * p.x).cos() + 0.3 * (PI * p.y).cos();
    let grad_fd = |p: Vec2| Vec2::new(-0.8 * PI * (2.0 * PI * p.x).sin(), -0.3 * PI * (PI * p.y).sin());
    (f, grad_f, fd, grad_fd)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformationReport {
    pub n: usize,
    pub scheme: FluxScheme,
    /// `||df/dt (continuity) - D lap(phi) (heat)||_2 / ||D lap(phi)||_2`.
    pub rel_l2: f64,
}

/// Compares one continuity step driven by the feedback velocity (built
/// from the analytic densities at face centers) with one heat step on
/// `phi = f - f_desired`, as tendencies.
pub fn transformation_check(n: usize, diffusion: f64, scheme: FluxScheme) -> Result<TransformationReport> {
    let domain = Domain::unit_square();
    let (f, grad_f, fd, grad_fd) = analytic_pair();
    let f_grid = ScalarField::from_fn(domain, n, n, f)?;
    let phi = ScalarField::from_fn(domain, n, n, |p| f(p) - fd(p))?;
    let velocity = FaceVelocity::from_fn(&f_grid, |p| (grad_f(p) - grad_fd(p)) * (-diffusion / f(p)));
    let dx = 1.0 / n as f64;
    let dt = (0.5 * GridSolverConfig::stable_dt(domain, n, diffusion)).min(0.25 * dx / velocity.max_speed());
    let cfg = GridSolverConfig::new(domain, n, dt, diffusion)?;
    let moved = continuity_step(&f_grid, &velocity, dt, scheme)?;
    let heated = heat_step(&phi, &cfg)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..n * n {
        let tc = (moved.samples()[k] - f_grid.samples()[k]) / dt;
        let th = (heated.samples()[k] - phi.samples()[k]) / dt;
        num += (tc - th) * (tc - th);
        den += th * th;
    }
    Ok(TransformationReport {
        n,
        scheme,
        rel_l2: (num / den).sqrt(),
    })
}

/// Evolves `f` under the discrete feedback velocity until `t_end`,
/// choosing each step from the diffusion and CFL limits.
pub fn evolve_continuity(
    f: &ScalarField,
    desired: &ScalarField,
    diffusion: f64,
    floor: f64,
    t_end: f64,
    scheme: FluxScheme,
) -> Result<ScalarField> {
    let (n, _) = f.resolution();
    let dx = f.cell_size().x.min(f.cell_size().y);
    let base = 0.4 * GridSolverConfig::stable_dt(*f.domain(), n, diffusion);
    let mut t = 0.0;
    let mut cur = f.clone();
    while t < t_end {
        if cur.samples().iter().any(|x| !x.is_finite()) {
            return Err(Error::Stability(format!(
                "continuity solution became non-finite at t = {t:e}"
            )));
        }
        let v = FaceVelocity::heat_law(&cur, desired, diffusion, floor)?;
        let vmax = v.max_speed();
        let mut dt = base;
        if vmax > 0.0 {
            dt = dt.min(0.4 * dx / vmax);
        }
        dt = dt.min(t_end - t);
        cur = continuity_step(&cur, &v, dt, scheme)?;
        t += dt;
    }
    Ok(cur)
}
