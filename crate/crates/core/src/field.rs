//! Grid-sampled scalar fields over a rectangular domain.
//!
//! Samples live at cell centers, row-major with `j` (the y index) as the
//! slow axis and `j = 0` at the lower edge of the domain. Values between
//! centers are bilinear; queries in the half-cell band along the boundary
//! are clamped to the outermost centers.

use std::path::Path;

use crate::error::{Error, Result};
use crate::pgm::GrayImage;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    lower: Vec2,
    size: Vec2,
}

impl Domain {
    pub fn new(lower: Vec2, size: Vec2) -> Result<Self> {
        if !(lower.x.is_finite() && lower.y.is_finite()) {
            return Err(Error::invalid("domain.lower", "must be finite"));
        }
        if !(size.x > 0.0 && size.x.is_finite()) {
            return Err(Error::invalid("domain.lx", "must be positive and finite"));
        }
        if !(size.y > 0.0 && size.y.is_finite()) {
            return Err(Error::invalid("domain.ly", "must be positive and finite"));
        }
        Ok(Domain { lower, size })
    }

    pub fn unit_square() -> Self {
        Domain {
            lower: Vec2::zeros(),
            size: Vec2::new(1.0, 1.0),
        }
    }

    pub fn square(side: f64) -> Result<Self> {
        Self::new(Vec2::zeros(), Vec2::new(side, side))
    }

    pub fn lower(&self) -> Vec2 {
        self.lower
    }

    pub fn upper(&self) -> Vec2 {
        self.lower + self.size
    }

    pub fn size(&self) -> Vec2 {
        self.size
    }

    pub fn area(&self) -> f64 {
        self.size.x * self.size.y
    }

    /// Density of the uniform distribution on the domain.
    pub fn uniform_level(&self) -> f64 {
        1.0 / self.area()
    }

    /// Closed-domain membership.
    pub fn contains(&self, p: Vec2) -> bool {
        let u = self.upper();
        p.x >= self.lower.x && p.x <= u.x && p.y >= self.lower.y && p.y <= u.y
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        let u = self.upper();
        Vec2::new(p.x.clamp(self.lower.x, u.x), p.y.clamp(self.lower.y, u.y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: Domain,
    nx: usize,
    ny: usize,
    samples: Vec<f64>,
    normalized: bool,
}

/// How grayscale intensities become density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Lower bound on every sample, as a fraction of the uniform level.
    pub floor: f64,
    /// Map dark pixels to high density instead of bright ones.
    pub invert: bool,
}

/// Default density floor, relative to the uniform level.
pub const DEFAULT_FLOOR: f64 = 1e-3;

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            floor: DEFAULT_FLOOR,
            invert: false,
        }
    }
}

impl ScalarField {
    pub fn new(domain: Domain, nx: usize, ny: usize, samples: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("resolution", "grid needs at least one cell per axis"));
        }
        if samples.len() != nx * ny {
            return Err(Error::invalid(
                "samples",
                format!(
                    "expected {} samples for a {nx}x{ny} grid, got {}",
                    nx * ny,
                    samples.len()
                ),
            ));
        }
        Ok(ScalarField {
            domain,
            nx,
            ny,
            samples,
            normalized: false,
        })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(domain: Domain, nx: usize, ny: usize, f: impl Fn(Vec2) -> f64) -> Result<Self> {
        let mut field = Self::new(domain, nx, ny, vec![0.0; nx * ny])?;
        for j in 0..ny {
            for i in 0..nx {
                field.samples[j * nx + i] = f(field.cell_center(i, j));
            }
        }
        Ok(field)
    }

    pub fn constant(domain: Domain, nx: usize, ny: usize, value: f64) -> Result<Self> {
        Self::new(domain, nx, ny, vec![value; nx * ny])
    }

    /// The normalized uniform density.
    pub fn uniform(domain: Domain, nx: usize, ny: usize) -> Result<Self> {
        let mut f = Self::constant(domain, nx, ny, domain.uniform_level())?;
        f.normalized = true;
        Ok(f)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        self.normalized = false;
        &mut self.samples
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn cell_size(&self) -> Vec2 {
        let s = self.domain.size();
        Vec2::new(s.x / self.nx as f64, s.y / self.ny as f64)
    }

    pub fn cell_area(&self) -> f64 {
        let c = self.cell_size();
        c.x * c.y
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        let c = self.cell_size();
        self.domain.lower() + Vec2::new((i as f64 + 0.5) * c.x, (j as f64 + 0.5) * c.y)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.samples[j * self.nx + i]
    }

    /// Continuous index coordinates: cell centers sit on integers.
    fn grid_coords(&self, p: Vec2) -> Vec2 {
        let c = self.cell_size();
        let d = p - self.domain.lower();
        Vec2::new(d.x / c.x - 0.5, d.y / c.y - 0.5)
    }

    /// Bilinear interpolation of the cell-center samples.
    pub fn sample(&self, p: Vec2) -> f64 {
        let g = self.grid_coords(p);
        let (i0, i1, tx) = bracket(g.x, self.nx);
        let (j0, j1, ty) = bracket(g.y, self.ny);
        let lo = lerp(self.get(i0, j0), self.get(i1, j0), tx);
        let hi = lerp(self.get(i0, j1), self.get(i1, j1), tx);
        lerp(lo, hi, ty)
    }

    /// Gradient of the bilinear interpolant.
    ///
    /// The normal derivative jumps across lines through cell centers; on
    /// such a line the two one-sided slopes are averaged. The clamped
    /// boundary band has zero normal slope.
    pub fn gradient(&self, p: Vec2) -> Vec2 {
        let g = self.grid_coords(p);
        let c = self.cell_size();
        let (j0, j1, ty) = bracket(g.y, self.ny);
        let (i0, i1, tx) = bracket(g.x, self.nx);
        let row = |i: usize| lerp(self.get(i, j0), self.get(i, j1), ty);
        let col = |j: usize| lerp(self.get(i0, j), self.get(i1, j), tx);
        Vec2::new(edge_slope(g.x, self.nx, c.x, row), edge_slope(g.y, self.ny, c.y, col))
    }

    /// Midpoint-rule integral.
    pub fn integrate(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.cell_area()
    }

    /// Rescales the samples to unit integral.
    pub fn normalize(&self) -> Result<Self> {
        let total = self.integrate();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NotNormalizable(format!("integral is {total}")));
        }
        if self.samples.iter().any(|&v| v < 0.0) {
            return Err(Error::NotNormalizable("negative samples".into()));
        }
        Ok(ScalarField {
            domain: self.domain,
            nx: self.nx,
            ny: self.ny,
            samples: self.samples.iter().map(|v| v / total).collect(),
            normalized: true,
        })
    }

    /// Pointwise difference on an identical grid.
    pub fn difference(&self, other: &ScalarField) -> Result<Self> {
        if self.resolution() != other.resolution() || self.domain != other.domain {
            return Err(Error::invalid("field", "grids differ"));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect();
        Self::new(self.domain, self.nx, self.ny, samples)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Converts a grayscale image into a normalized density.
    ///
    /// Image row 0 is the top edge, so it lands at the highest `j`. Every
    /// sample is raised to at least `floor` times the uniform level before
    /// the final normalization.
    pub fn from_image(image: &GrayImage, domain: Domain, opts: IngestOptions) -> Result<Self> {
        if !(opts.floor >= 0.0 && opts.floor.is_finite()) {
            return Err(Error::invalid("desired.floor", "must be non-negative and finite"));
        }
        let (nx, ny) = (image.width(), image.height());
        let max = image.maxval() as f64;
        let mut samples = vec![0.0; nx * ny];
        for row in 0..ny {
            let j = ny - 1 - row;
            for i in 0..nx {
                let v = image.pixel(i, row) as f64 / max;
                samples[j * nx + i] = if opts.invert { 1.0 - v } else { v };
            }
        }
        let raw = Self::new(domain, nx, ny, samples)?;
        let level = opts.floor * domain.uniform_level();
        let density = if raw.samples.iter().all(|&v| v == 0.0) {
            if opts.floor == 0.0 {
                return Err(Error::NotNormalizable(
                    "image is entirely black and the density floor is zero".into(),
                ));
            }
            Self::constant(domain, nx, ny, 1.0)?
        } else {
            raw.normalize()?
        };
        let mut floored = density;
        for v in &mut floored.samples {
            *v = v.max(level);
        }
        floored.normalize()
    }
}

/// Reads a PGM file (P2 or P5) and converts it with [`ScalarField::from_image`].
pub fn ingest_image(path: impl AsRef<Path>, domain: Domain, opts: IngestOptions) -> Result<ScalarField> {
    let image = GrayImage::read(path)?;
    ScalarField::from_image(&image, domain, opts)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Lower and upper sample index and interpolation weight along one axis,
/// clamping to the outermost centers.
#[inline]
fn bracket(g: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let g = g.clamp(0.0, (n - 1) as f64);
    let i0 = (g.floor() as usize).min(n - 2);
    (i0, i0 + 1, g - i0 as f64)
}

/// Slope along one axis given the values on the neighbouring center lines.
fn edge_slope(g: f64, n: usize, spacing: f64, value: impl Fn(usize) -> f64) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let slope = |k: i64| -> f64 {
        if k < 0 || k >= n as i64 - 1 {
            0.0
        } else {
            (value(k as usize + 1) - value(k as usize)) / spacing
        }
    };
    let k = g.floor();
    if g == k {
        0.5 * (slope(k as i64 - 1) + slope(k as i64))
    } else {
        slope(k as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> Domain {
        Domain::unit_square()
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::new(Vec2::zeros(), Vec2::new(0.0, 1.0)).is_err());
        assert!(Domain::new(Vec2::zeros(), Vec2::new(1.0, -2.0)).is_err());
        let d = Domain::new(Vec2::new(-1.0, 2.0), Vec2::new(2.0, 4.0)).unwrap();
        assert_eq!(d.area(), 8.0);
        assert!(d.contains(Vec2::new(1.0, 6.0)));
        assert!(!d.contains(Vec2::new(1.0, 6.0 + 1e-12)));
    }

    #[test]
    fn uniform_gray_image_gives_uniform_field() {
        let img = GrayImage::new(7, 5, 255, vec![128; 35]).unwrap();
        let dom = Domain::new(Vec2::zeros(), Vec2::new(2.0, 3.0)).unwrap();
        let f = ScalarField::from_image(&img, dom, IngestOptions::default()).unwrap();
        for &v in f.samples() {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
        assert!(f.is_normalized());
    }

    #[test]
    fn two_pixel_image() {
        let img = GrayImage::new(2, 1, 255, vec![0, 255]).unwrap();
        let opts = IngestOptions {
            floor: 0.0,
            invert: false,
        };
        let f = ScalarField::from_image(&img, unit(), opts).unwrap();
        assert_eq!(f.samples(), &[0.0, 2.0]);
        let inv = ScalarField::from_image(&img, unit(), IngestOptions { invert: true, ..opts }).unwrap();
        assert_eq!(inv.samples(), &[2.0, 0.0]);
    }

    #[test]
    fn image_rows_are_flipped_to_y_up() {
        // Top row bright: density sits at high y.
        let img = GrayImage::new(1, 2, 255, vec![255, 0]).unwrap();
        let f = ScalarField::from_image(
            &img,
            unit(),
            IngestOptions {
                floor: 0.0,
                invert: false,
            },
        )
        .unwrap();
        assert_eq!(f.get(0, 1), 2.0);
        assert_eq!(f.get(0, 0), 0.0);
    }

    #[test]
    fn black_image_needs_a_floor() {
        let img = GrayImage::new(3, 3, 255, vec![0; 9]).unwrap();
        let err = ScalarField::from_image(
            &img,
            unit(),
            IngestOptions {
                floor: 0.0,
                invert: false,
            },
        );
        assert!(matches!(err, Err(Error::NotNormalizable(_))));
        let f = ScalarField::from_image(&img, unit(), IngestOptions::default()).unwrap();
        assert!((f.integrate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn floor_is_applied() {
        let mut px = vec![0u16; 100];
        px[55] = 255;
        let img = GrayImage::new(10, 10, 255, px).unwrap();
        let f = ScalarField::from_image(
            &img,
            unit(),
            IngestOptions {
                floor: 0.01,
                invert: false,
            },
        )
        .unwrap();
        let (lo, _) = f.min_max();
        // After renormalization the floor drops by at most the added mass.
        assert!(lo > 0.009 && lo <= 0.01);
        assert!((f.integrate() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn interpolation_identities() {
        let f = ScalarField::new(unit(), 2, 1, vec![0.0, 2.0]).unwrap();
        assert_eq!(f.sample(f.cell_center(0, 0)), 0.0);
        assert_eq!(f.sample(f.cell_center(1, 0)), 2.0);
        assert!((f.sample(Vec2::new(0.5, 0.5)) - 1.0).abs() < 1e-15);
        // Clamp band.
        assert_eq!(f.sample(Vec2::new(0.0, 0.0)), 0.0);
        assert_eq!(f.sample(Vec2::new(1.0, 1.0)), 2.0);
        let u = ScalarField::uniform(unit(), 4, 4).unwrap();
        assert_eq!(u.sample(Vec2::new(0.123, 0.987)), 1.0);
        assert_eq!(u.gradient(Vec2::new(0.3, 0.6)), Vec2::zeros());
    }

    #[test]
    fn linear_field_has_exact_gradient() {
        let s = 3.5;
        let f = ScalarField::from_fn(unit(), 16, 8, |p| 1.0 + s * p.x).unwrap();
        for p in [
            Vec2::new(0.31, 0.5),
            Vec2::new(0.5, 0.22),
            Vec2::new(f.cell_center(4, 3).x, 0.4),
        ] {
            let g = f.gradient(p);
            assert!((g.x - s).abs() < 1e-12, "{g:?}");
            assert!(g.y.abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples = (0..20 * 20).map(|_| rng.random::<f64>()).collect();
        let f = ScalarField::new(unit(), 20, 20, samples).unwrap();
        let eps = 1e-7;
        let mut checked = 0;
        while checked < 100 {
            let p = Vec2::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
            let g = f.grid_coords(p);
            let margin = 2.0 * eps * 20.0;
            if (g.x - g.x.round()).abs() < margin || (g.y - g.y.round()).abs() < margin {
                continue;
            }
            let fd = Vec2::new(
                (f.sample(p + Vec2::new(eps, 0.0)) - f.sample(p - Vec2::new(eps, 0.0))) / (2.0 * eps),
                (f.sample(p + Vec2::new(0.0, eps)) - f.sample(p - Vec2::new(0.0, eps))) / (2.0 * eps),
            );
            assert!((f.gradient(p) - fd).norm() < 1e-8 * 20.0f64.max(fd.norm()), "{p:?}");
            checked += 1;
        }
    }

    #[test]
    fn gradient_averages_on_center_lines() {
        // Slopes 2 then 4 either side of the middle center.
        let f = ScalarField::new(unit(), 3, 1, vec![0.0, 2.0 / 3.0, 2.0]).unwrap();
        let mid = f.cell_center(1, 0);
        assert!((f.gradient(mid).x - 3.0).abs() < 1e-12);
    }

    #[test]
    fn integration() {
        let zero = ScalarField::constant(unit(), 5, 5, 0.0).unwrap();
        assert_eq!(zero.integrate(), 0.0);
        assert!(zero.normalize().is_err());
        let f = ScalarField::from_fn(unit(), 32, 32, |p| (p.x * 7.0).sin().abs() + p.y).unwrap();
        let n = f.normalize().unwrap();
        assert!((n.integrate() - 1.0).abs() < 1e-9);
        let g = ScalarField::from_fn(unit(), 32, 32, |p| 1.0 + 0.5 * (p.x * 3.0).cos()).unwrap();
        let phi = g.normalize().unwrap().difference(&n).unwrap();
        assert!(phi.integrate().abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(vals in proptest::collection::vec(0.0f64..10.0, 12)) {
            prop_assume!(vals.iter().sum::<f64>() > 1e-3);
            let f = ScalarField::new(unit(), 4, 3, vals).unwrap().normalize().unwrap();
            let g = f.normalize().unwrap();
            for (a, b) in f.samples().iter().zip(g.samples()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn bilinear_is_continuous_across_edges(
            vals in proptest::collection::vec(-5.0f64..5.0, 36),
            k in 0usize..6,
            y in 0.0f64..1.0,
        ) {
            let f = ScalarField::new(unit(), 6, 6, vals).unwrap();
            let edge = f.cell_center(k, 0).x;
            let a = f.sample(Vec2::new(edge - 1e-9, y));
            let b = f.sample(Vec2::new(edge + 1e-9, y));
            prop_assert!((a - b).abs() < 1e-6);
        }
    }
}
