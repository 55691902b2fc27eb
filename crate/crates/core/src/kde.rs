//! Kernel density estimation of the swarm density from agent positions.
//!
//! `f(x) = 1/(N h^2) sum_j K((x - r_j)/h)` and its gradient
//! `1/(N h^3) sum_j grad K((x - r_j)/h)`. The grid path visits only the
//! agents in the 3x3 block of buckets around the query, with buckets at
//! least one kernel support radius wide, so it sees every agent the kernel
//! does not zero out.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Domain;
use crate::kernels::Kernel;
use crate::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    positions: Vec<Vec2>,
    time: f64,
}

impl SwarmState {
    pub fn new(positions: Vec<Vec2>, time: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptySwarm);
        }
        if !(time >= 0.0 && time.is_finite()) {
            return Err(Error::invalid("t", "simulation time must be non-negative"));
        }
        Ok(SwarmState { positions, time })
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEstimate {
    pub value: f64,
    pub gradient: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Brute,
    Grid,
}

/// Treatment of kernel mass that falls outside the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCorrection {
    /// Plain estimate; mass near the walls leaks out of the domain.
    None,
    /// Adds mirror images of the agents across each nearby wall (and
    /// corner), so the estimate keeps its mass and has zero normal
    /// gradient on the walls.
    Reflection,
}

impl BoundaryCorrection {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCorrection::None => "none",
            BoundaryCorrection::Reflection => "reflect",
        }
    }
}

/// Uniform bucket grid over the bounding box of the agents.
///
/// Buckets are stored compressed: `starts[b]..starts[b + 1]` indexes into
/// `agents`, and within a bucket agents are in ascending index order.
#[derive(Debug, Clone)]
pub struct NeighborGrid {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<usize>,
    agents: Vec<usize>,
}

impl NeighborGrid {
    pub fn build(positions: &[Vec2], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", "must be positive and finite"));
        }
        if positions.is_empty() {
            return Err(Error::EmptySwarm);
        }
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for p in positions {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::invalid("positions", "non-finite agent position"));
            }
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let cell = radius;
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut grid = NeighborGrid {
            origin: lo,
            cell,
            nx,
            ny,
            starts: vec![0; nx * ny + 1],
            agents: vec![0; positions.len()],
        };
        let buckets: Vec<usize> = positions.iter().map(|&p| grid.bucket_of(p)).collect();
        for &b in &buckets {
            grid.starts[b + 1] += 1;
        }
        for b in 0..nx * ny {
            grid.starts[b + 1] += grid.starts[b];
        }
        let mut fill = grid.starts.clone();
        for (agent, &b) in buckets.iter().enumerate() {
            grid.agents[fill[b]] = agent;
            fill[b] += 1;
        }
        Ok(grid)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    fn cell_coords(&self, p: Vec2) -> (i64, i64) {
        let d = (p - self.origin) / self.cell;
        (d.x.floor() as i64, d.y.floor() as i64)
    }

    /// Bucket index of a point inside the bounding box.
    fn bucket_of(&self, p: Vec2) -> usize {
        let (cx, cy) = self.cell_coords(p);
        let cx = cx.clamp(0, self.nx as i64 - 1) as usize;
        let cy = cy.clamp(0, self.ny as i64 - 1) as usize;
        cy * self.nx + cx
    }

    pub fn bucket(&self, b: usize) -> &[usize] {
        &self.agents[self.starts[b]..self.starts[b + 1]]
    }

    pub fn occupied_buckets(&self) -> usize {
        (0..self.nx * self.ny).filter(|&b| !self.bucket(b).is_empty()).count()
    }

    /// Buckets of the 3x3 block around `x`, in row-major order. Queries
    /// outside the bounding box see whatever part of the block overlaps it.
    pub fn neighborhood(&self, x: Vec2) -> impl Iterator<Item = &[usize]> + '_ {
        let (cx, cy) = self.cell_coords(x);
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        (cy - 1..=cy + 1)
            .filter(move |&j| (0..ny).contains(&j))
            .flat_map(move |j| {
                (cx - 1..=cx + 1)
                    .filter(move |&i| (0..nx).contains(&i))
                    .map(move |i| self.bucket((j * nx + i) as usize))
            })
    }

    /// Agents within `radius` of `x` (at most the build radius), ascending.
    pub fn within(&self, positions: &[Vec2], x: Vec2, radius: f64) -> Vec<usize> {
        debug_assert!(radius <= self.cell);
        let r2 = radius * radius;
        let mut out: Vec<usize> = self
            .neighborhood(x)
            .flatten()
            .copied()
            .filter(|&a| (positions[a] - x).norm_squared() <= r2)
            .collect();
        out.sort_unstable();
        out
    }
}

pub fn build_neighbor_grid(state: &SwarmState, radius: f64) -> Result<NeighborGrid> {
    NeighborGrid::build(state.positions(), radius)
}

/// Largest pointwise difference between the truncated, renormalized
/// Gaussian estimate and the untruncated one, for bandwidth `h`.
///
/// Inside the cutoff every term grows by the renormalization factor, at
/// most `K(0) * tau / (1 - tau)` where `tau = exp(-2 c^2)` is the dropped
/// mass; outside it each dropped term is at most `K(c)`. An average of
/// per-agent differences is bounded by the larger of the two.
pub fn truncation_bound(kernel: &Kernel, h: f64) -> f64 {
    let Some(c) = kernel.support_radius() else {
        return 0.0;
    };
    let full = match kernel.with_cutoff(None) {
        Ok(k) => k,
        // Compact kernels have no truncation.
        Err(_) => return 0.0,
    };
    let tau = 1.0 - full.peak() / kernel.peak();
    let inside = full.peak() * tau / (1.0 - tau);
    let outside = full.value_sq(c * c);
    inside.max(outside) / h.powi(kernel.dim() as i32)
}

/// Frozen-epoch density estimator over one swarm snapshot.
pub struct Estimator<'a> {
    positions: &'a [Vec2],
    kernel: &'a Kernel,
    h: f64,
    grid: Option<NeighborGrid>,
    mirror: Option<Domain>,
    value_scale: f64,
    gradient_scale: f64,
}

impl<'a> Estimator<'a> {
    pub fn new(state: &'a SwarmState, kernel: &'a Kernel, h: f64, method: Method) -> Result<Self> {
        Self::from_positions(state.positions(), kernel, h, method)
    }

    pub fn from_positions(positions: &'a [Vec2], kernel: &'a Kernel, h: f64, method: Method) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptySwarm);
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("h", "bandwidth must be positive and finite"));
        }
        if kernel.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: kernel.dim(),
            });
        }
        let grid = match method {
            Method::Brute => None,
            Method::Grid => {
                let support = kernel
                    .support_radius()
                    .ok_or_else(|| Error::UnboundedSupport(kernel.name().into()))?;
                Some(NeighborGrid::build(positions, support * h)?)
            }
        };
        let n = positions.len() as f64;
        Ok(Estimator {
            positions,
            kernel,
            h,
            grid,
            mirror: None,
            value_scale: 1.0 / (n * h * h),
            gradient_scale: 1.0 / (n * h * h * h),
        })
    }

    /// Mirrors agents across the walls of `domain`, which must contain them.
    pub fn with_correction(mut self, correction: BoundaryCorrection, domain: Domain) -> Self {
        self.mirror = match correction {
            BoundaryCorrection::None => None,
            BoundaryCorrection::Reflection => Some(domain),
        };
        self
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> Option<&NeighborGrid> {
        self.grid.as_ref()
    }

    #[inline]
    fn accumulate(&self, x: Vec2, agents: impl Iterator<Item = usize>) -> (f64, Vec2) {
        let inv_h = 1.0 / self.h;
        let mut value = 0.0;
        let mut grad = Vec2::zeros();
        for a in agents {
            let u = (x - self.positions[a]) * inv_h;
            let r2 = u.norm_squared();
            value += self.kernel.value_sq(r2);
            grad += u * self.kernel.gradient_scale_sq(r2);
        }
        (value, grad)
    }

    /// Density and gradient at `x`.
    pub fn estimate(&self, x: Vec2) -> DensityEstimate {
        self.estimate_with(x, false)
    }

    /// Brute-force sum regardless of the configured method.
    pub fn estimate_brute(&self, x: Vec2) -> DensityEstimate {
        self.estimate_with(x, true)
    }

    fn sum_at(&self, q: Vec2, brute: bool) -> (f64, Vec2) {
        match (&self.grid, brute) {
            (Some(grid), false) => {
                let mut value = 0.0;
                let mut grad = Vec2::zeros();
                for bucket in grid.neighborhood(q) {
                    let (v, g) = self.accumulate(q, bucket.iter().copied());
                    value += v;
                    grad += g;
                }
                (value, grad)
            }
            _ => self.accumulate(q, 0..self.positions.len()),
        }
    }

    fn estimate_with(&self, x: Vec2, brute: bool) -> DensityEstimate {
        let (mut value, mut grad) = self.sum_at(x, brute);
        if let Some(domain) = &self.mirror {
            // Mirroring the agents is the same as mirroring the query. An
            // image is only needed when it can reach an agent in the domain.
            let reach = self.kernel.support_radius().map_or(f64::INFINITY, |c| c * self.h);
            let (lo, hi) = (domain.lower(), domain.upper());
            let axis = |c: f64, l: f64, u: f64| -> [Option<f64>; 3] {
                [
                    Some(c),
                    (c - l < reach).then_some(2.0 * l - c),
                    (u - c < reach).then_some(2.0 * u - c),
                ]
            };
            let xs = axis(x.x, lo.x, hi.x);
            let ys = axis(x.y, lo.y, hi.y);
            for (a, qx) in xs.iter().enumerate() {
                for (b, qy) in ys.iter().enumerate() {
                    let (Some(qx), Some(qy)) = (qx, qy) else { continue };
                    if a == 0 && b == 0 {
                        continue;
                    }
                    let (v, g) = self.sum_at(Vec2::new(*qx, *qy), brute);
                    value += v;
                    let sx = if a == 0 { 1.0 } else { -1.0 };
                    let sy = if b == 0 { 1.0 } else { -1.0 };
                    grad += Vec2::new(sx * g.x, sy * g.y);
                }
            }
        }
        DensityEstimate {
            value: value * self.value_scale,
            gradient: grad * self.gradient_scale,
        }
    }

    /// Estimates at many points, in parallel on the current rayon pool.
    /// Each point is summed independently, so the result does not depend
    /// on the number of workers.
    pub fn estimate_many(&self, points: &[Vec2]) -> Vec<DensityEstimate> {
        points.par_iter().map(|&x| self.estimate(x)).collect()
    }

    /// Estimates at every agent position.
    pub fn estimate_agents(&self) -> Vec<DensityEstimate> {
        self.estimate_many(self.positions)
    }
}

pub fn estimate_density(
    state: &SwarmState,
    kernel: &Kernel,
    h: f64,
    x: Vec2,
    method: Method,
) -> Result<DensityEstimate> {
    Ok(Estimator::new(state, kernel, h, method)?.estimate(x))
}

/// Grid-accelerated estimates at every agent.
pub fn estimate_all_agents(state: &SwarmState, kernel: &Kernel, h: f64) -> Result<Vec<DensityEstimate>> {
    Ok(Estimator::new(state, kernel, h, Method::Grid)?.estimate_agents())
}
