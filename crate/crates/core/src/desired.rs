//! Analytic desired densities: uniform and isotropic Gaussian mixtures.

use crate::error::{Error, Result};
use crate::field::{Domain, ScalarField};
use crate::pgm::GrayImage;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub mean: Vec2,
    pub std: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    bumps: Vec<Bump>,
}

impl GaussianMixture {
    pub fn new(bumps: Vec<Bump>) -> Result<Self> {
        if bumps.is_empty() {
            return Err(Error::invalid("desired.components", "need at least one component"));
        }
        for (i, b) in bumps.iter().enumerate() {
            if !(b.std > 0.0 && b.std.is_finite()) {
                return Err(Error::invalid(
                    format!("desired.components[{i}]"),
                    "std must be positive",
                ));
            }
            if !(b.weight > 0.0 && b.weight.is_finite()) {
                return Err(Error::invalid(
                    format!("desired.components[{i}]"),
                    "weight must be positive",
                ));
            }
            if !(b.mean.x.is_finite() && b.mean.y.is_finite()) {
                return Err(Error::invalid(
                    format!("desired.components[{i}]"),
                    "mean must be finite",
                ));
            }
        }
        Ok(GaussianMixture { bumps })
    }

    /// Two equal bumps on the diagonal of `domain`, at 30% and 70% of each
    /// side, with std 10% of the shorter side.
    pub fn bimodal(domain: &Domain) -> Self {
        let at = |s: f64| domain.lower() + domain.size() * s;
        let std = 0.1 * domain.size().x.min(domain.size().y);
        GaussianMixture {
            bumps: vec![
                Bump {
                    mean: at(0.3),
                    std,
                    weight: 1.0,
                },
                Bump {
                    mean: at(0.7),
                    std,
                    weight: 1.0,
                },
            ],
        }
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    /// Unnormalized mixture value (weights need not sum to one).
    pub fn value(&self, p: Vec2) -> f64 {
        self.bumps
            .iter()
            .map(|b| {
                let s2 = b.std * b.std;
                b.weight * (-(p - b.mean).norm_squared() / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
            })
            .sum()
    }

    /// Cell-center raster, normalized over `domain`, with samples raised
    /// to `floor` times the uniform level and normalized again.
    pub fn rasterize(&self, domain: Domain, n: usize, floor: f64) -> Result<ScalarField> {
        if !(floor >= 0.0 && floor.is_finite()) {
            return Err(Error::invalid("desired.floor", "must be non-negative and finite"));
        }
        let raw = ScalarField::from_fn(domain, n, n, |p| self.value(p))?.normalize()?;
        let lift = floor * domain.uniform_level();
        let samples = raw.samples().iter().map(|&v| v.max(lift)).collect();
        ScalarField::new(domain, n, n, samples)?.normalize()
    }

    /// 8-bit grayscale rendering, brightest at the mixture peak.
    pub fn to_image(&self, domain: Domain, n: usize) -> Result<GrayImage> {
        let raw = ScalarField::from_fn(domain, n, n, |p| self.value(p))?;
        let (_, peak) = raw.min_max();
        let mut pixels = Vec::with_capacity(n * n);
        for row in 0..n {
            let j = n - 1 - row;
            for i in 0..n {
                pixels.push((raw.get(i, j) / peak * 255.0).round() as u16);
            }
        }
        GrayImage::new(n, n, 255, pixels)
    }
}
