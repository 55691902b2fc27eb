//! Smoothing kernels and bandwidth selection.
//!
//! Kernels are written in normalized-argument form: `K(u)` takes the
//! dimensionless offset `u = (x - r) / h`, and the estimator applies the
//! `h^-d` scaling. Every shipped kernel is radially symmetric, unimodal,
//! bounded, and integrates to one over its support.

use std::f64::consts::PI;

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::Vec2;

/// Absolute error requested from the double-exponential rule.
const QUAD_TARGET: f64 = 1e-13;
/// Largest error estimate accepted before reporting non-convergence.
const QUAD_TOLERANCE: f64 = 1e-9;
/// Integration half-width, in standard deviations, for Gaussians without a cutoff.
const UNBOUNDED_SPAN_SIGMAS: f64 = 20.0;

/// Per-axis variance of the Gaussian `(2/pi) exp(-2 |u|^2)` (in two dimensions).
pub const SWARM_GAUSSIAN_VARIANCE: f64 = 0.25;
/// Default evaluation cutoff of the swarm Gaussian, in bandwidth units.
/// The shape has decayed to `exp(-18) < 2e-8` of its peak there.
pub const SWARM_GAUSSIAN_CUTOFF: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// `exp(-|u|^2 / (2 s^2))` with per-axis variance `s^2`.
    Gaussian { variance: f64 },
    /// `1 - |u|^2` on the unit ball.
    Epanechnikov,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    dim: usize,
    cutoff: Option<f64>,
    norm: f64,
}

impl Kernel {
    /// The swarm Gaussian `K(u) = (2/pi)^(d/2) exp(-2 |u|^2)`, cut off at `|u| = 3`.
    pub fn gaussian(dim: usize) -> Result<Self> {
        Self::gaussian_with_variance(dim, SWARM_GAUSSIAN_VARIANCE, Some(SWARM_GAUSSIAN_CUTOFF))
    }

    /// The standard normal density in `dim` dimensions, cut off at six sigma.
    pub fn standard_gaussian(dim: usize) -> Result<Self> {
        Self::gaussian_with_variance(dim, 1.0, Some(6.0))
    }

    pub fn gaussian_with_variance(dim: usize, variance: f64, cutoff: Option<f64>) -> Result<Self> {
        check_dim(dim)?;
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid("kernel.variance", "must be positive and finite"));
        }
        if let Some(c) = cutoff {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::invalid("kernel.cutoff", "must be positive"));
            }
        }
        let full = (2.0 * PI * variance).powf(-(dim as f64) / 2.0);
        // Mass of the untruncated density inside the cutoff ball.
        let inside = match cutoff {
            None => 1.0,
            Some(c) if dim == 1 => erf(c / (2.0 * variance).sqrt()),
            Some(c) => 1.0 - (-c * c / (2.0 * variance)).exp(),
        };
        Ok(Kernel {
            family: KernelFamily::Gaussian { variance },
            dim,
            cutoff,
            norm: full / inside,
        })
    }

    pub fn epanechnikov(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let norm = if dim == 1 { 0.75 } else { 2.0 / PI };
        Ok(Kernel {
            family: KernelFamily::Epanechnikov,
            dim,
            cutoff: Some(1.0),
            norm,
        })
    }

    /// Looks a kernel up by its configuration name.
    pub fn by_name(name: &str, dim: usize, cutoff: Option<f64>) -> Result<Self> {
        match name {
            "gaussian" => {
                Self::gaussian_with_variance(dim, SWARM_GAUSSIAN_VARIANCE, cutoff.or(Some(SWARM_GAUSSIAN_CUTOFF)))
            }
            "epanechnikov" => match cutoff {
                Some(c) if c != 1.0 => Err(Error::invalid(
                    "kernel.cutoff",
                    "the Epanechnikov kernel has fixed support radius 1",
                )),
                _ => Self::epanechnikov(dim),
            },
            other => Err(Error::invalid(
                "kernel.name",
                format!("unknown kernel `{other}` (expected gaussian or epanechnikov)"),
            )),
        }
    }

    /// Same kernel with the evaluation cutoff replaced; `None` removes it.
    ///
    /// Only Gaussians accept a new cutoff.
    pub fn with_cutoff(&self, cutoff: Option<f64>) -> Result<Self> {
        match self.family {
            KernelFamily::Gaussian { variance } => Self::gaussian_with_variance(self.dim, variance, cutoff),
            KernelFamily::Epanechnikov => Err(Error::invalid(
                "kernel.cutoff",
                "the Epanechnikov kernel has fixed support radius 1",
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            KernelFamily::Gaussian { .. } => "gaussian",
            KernelFamily::Epanechnikov => "epanechnikov",
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared order: index of the first non-vanishing moment.
    pub fn order(&self) -> u32 {
        2
    }

    /// Radius beyond which the kernel is exactly zero, in bandwidth units.
    pub fn support_radius(&self) -> Option<f64> {
        self.cutoff
    }

    /// `K(0)`.
    pub fn peak(&self) -> f64 {
        self.value_sq(0.0)
    }

    /// Kernel value as a function of the squared radius `|u|^2`.
    #[inline]
    pub fn value_sq(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian { variance } => match self.cutoff {
                Some(c) if r2 > c * c => 0.0,
                _ => self.norm * (-r2 / (2.0 * variance)).exp(),
            },
            KernelFamily::Epanechnikov => {
                if r2 >= 1.0 {
                    0.0
                } else {
                    self.norm * (1.0 - r2)
                }
            }
        }
    }

    /// Scalar `s` with `grad K(u) = s * u`, as a function of `|u|^2`.
    ///
    /// The Epanechnikov kernel has a kink on the unit sphere; there the
    /// outside (zero) gradient is returned.
    #[inline]
    pub fn gradient_scale_sq(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian { variance } => match self.cutoff {
                Some(c) if r2 > c * c => 0.0,
                _ => -self.norm * (-r2 / (2.0 * variance)).exp() / variance,
            },
            KernelFamily::Epanechnikov => {
                if r2 >= 1.0 {
                    0.0
                } else {
                    -2.0 * self.norm
                }
            }
        }
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        let r2 = self.checked_sq_norm(u)?;
        Ok(self.value_sq(r2))
    }

    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let r2 = self.checked_sq_norm(u)?;
        let s = self.gradient_scale_sq(r2);
        Ok(u.iter().map(|x| s * x).collect())
    }

    /// Two-dimensional evaluation without the dimension check.
    #[inline]
    pub fn eval2(&self, u: Vec2) -> f64 {
        self.value_sq(u.norm_squared())
    }

    #[inline]
    pub fn gradient2(&self, u: Vec2) -> Vec2 {
        u * self.gradient_scale_sq(u.norm_squared())
    }

    fn checked_sq_norm(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: u.len(),
            });
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("u", "non-finite kernel argument"));
        }
        Ok(u.iter().map(|x| x * x).sum())
    }

    /// The one-dimensional member of the same family (same variance and cutoff).
    pub fn profile(&self) -> Kernel {
        match self.family {
            KernelFamily::Gaussian { variance } => {
                Self::gaussian_with_variance(1, variance, self.cutoff).expect("validated at construction")
            }
            KernelFamily::Epanechnikov => Self::epanechnikov(1).expect("dimension 1 is supported"),
        }
    }

    /// Half-width of the region quadrature has to cover.
    fn integration_radius(&self) -> f64 {
        match (self.cutoff, self.family) {
            (Some(c), _) => c,
            (None, KernelFamily::Gaussian { variance }) => UNBOUNDED_SPAN_SIGMAS * variance.sqrt(),
            (None, KernelFamily::Epanechnikov) => 1.0,
        }
    }

    /// `kappa_j = int x^j K(x) dx` of the one-dimensional profile.
    pub fn moment(&self, j: u32) -> Result<f64> {
        let p = self.profile();
        let r = p.integration_radius();
        integrate_1d(|x| x.powi(j as i32) * p.value_sq(x * x), -r, r)
    }

    /// `R(K) = int K(u)^2 du` over the kernel's own dimension.
    pub fn roughness(&self) -> Result<f64> {
        self.integrate_over_support(|r2| {
            let k = self.value_sq(r2);
            k * k
        })
    }

    /// `int K(u) du` over the kernel's own dimension.
    pub fn mass(&self) -> Result<f64> {
        self.integrate_over_support(|r2| self.value_sq(r2))
    }

    /// Order inferred from the moments: the first `j >= 1` with `|kappa_j| > 1e-8`.
    pub fn detect_order(&self) -> Result<u32> {
        for j in 1..=8 {
            if self.moment(j)?.abs() > 1e-8 {
                return Ok(j);
            }
        }
        Err(Error::invalid("kernel", "no non-vanishing moment up to order 8"))
    }

    /// Integrates a radial integrand `g(|u|^2)` over the support; in two
    /// dimensions as `2 pi int_0^R g(r^2) r dr`.
    fn integrate_over_support(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        let r = self.integration_radius();
        if self.dim == 1 {
            return integrate_1d(|x| g(x * x), -r, r);
        }
        Ok(2.0 * PI * integrate_1d(|s| g(s * s) * s, 0.0, r)?)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::invalid(
            "kernel.dim",
            format!("dimension {dim} is not supported (1 or 2)"),
        ))
    }
}

/// Panels per integral; keeps narrow peaks inside wide spans resolved.
const QUAD_PANELS: usize = 8;

fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let width = (b - a) / QUAD_PANELS as f64;
    let mut integral = 0.0;
    let mut estimate = 0.0;
    for p in 0..QUAD_PANELS {
        let lo = a + p as f64 * width;
        let out = quadrature::double_exponential::integrate(&f, lo, lo + width, QUAD_TARGET);
        integral += out.integral;
        estimate += out.error_estimate;
    }
    if !(estimate <= QUAD_TOLERANCE && integral.is_finite()) {
        return Err(Error::QuadratureNonConvergence {
            estimate,
            tolerance: QUAD_TOLERANCE,
        });
    }
    Ok(integral)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthPolicy {
    Fixed(f64),
    /// `h = sigma_hat * c_nu * N^(-1/(2 nu + d))`.
    RuleOfThumb {
        sigma_hat: f64,
        c_nu: f64,
    },
}

/// Reference constant used when none is configured.
pub const DEFAULT_C_NU: f64 = 1.0;

impl BandwidthPolicy {
    pub fn select(&self, n: usize, dim: usize, order: u32) -> Result<f64> {
        if n == 0 {
            return Err(Error::invalid("N", "bandwidth selection needs at least one agent"));
        }
        match *self {
            BandwidthPolicy::Fixed(h) => {
                if h > 0.0 && h.is_finite() {
                    Ok(h)
                } else {
                    Err(Error::invalid("bandwidth.h", "must be positive and finite"))
                }
            }
            BandwidthPolicy::RuleOfThumb { sigma_hat, c_nu } => {
                if !(sigma_hat > 0.0 && sigma_hat.is_finite()) {
                    return Err(Error::invalid(
                        "sigma_hat",
                        "sample standard deviation is zero (co-located sample)",
                    ));
                }
                if !(c_nu > 0.0 && c_nu.is_finite()) {
                    return Err(Error::invalid("bandwidth.c_nu", "must be positive and finite"));
                }
                let exponent = -1.0 / (2.0 * order as f64 + dim as f64);
                Ok(sigma_hat * c_nu * (n as f64).powf(exponent))
            }
        }
    }

    pub fn select_for(&self, kernel: &Kernel, n: usize) -> Result<f64> {
        self.select(n, kernel.dim(), kernel.order())
    }
}

/// Pooled sample standard deviation of a planar point set: the square root
/// of the mean of the two per-axis unbiased variances. Zero for `n < 2`.
pub fn sample_std(points: &[Vec2]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mean = points.iter().fold(Vec2::zeros(), |acc, p| acc + p) / n as f64;
    let ss: f64 = points.iter().map(|p| (p - mean).norm_squared()).sum();
    (ss / (2.0 * (n as f64 - 1.0))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn shipped() -> Vec<Kernel> {
        vec![
            Kernel::gaussian(2).unwrap(),
            Kernel::gaussian(1).unwrap(),
            Kernel::epanechnikov(2).unwrap(),
            Kernel::epanechnikov(1).unwrap(),
            Kernel::gaussian(2).unwrap().with_cutoff(None).unwrap(),
            Kernel::gaussian(1).unwrap().with_cutoff(None).unwrap(),
        ]
    }

    #[test]
    fn gaussian_peak() {
        let k = Kernel::gaussian(2).unwrap();
        assert_relative_eq!(k.eval(&[0.0, 0.0]).unwrap(), 2.0 / PI, max_relative = 1e-7);
    }

    #[test]
    fn exactly_zero_beyond_cutoff() {
        let k = Kernel::gaussian(2).unwrap();
        assert_eq!(k.eval(&[3.0001, 0.0]).unwrap(), 0.0);
        assert_eq!(k.gradient(&[0.0, -3.5]).unwrap(), vec![0.0, 0.0]);
        assert!(k.eval(&[2.9999, 0.0]).unwrap() > 0.0);
        let e = Kernel::epanechnikov(2).unwrap();
        assert_eq!(e.eval(&[0.6, 0.8]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let k = Kernel::gaussian(2).unwrap();
        assert!(matches!(
            k.eval(&[0.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(
            k.gradient(&[0.0, 1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Kernel::gaussian(3).is_err());
    }

    #[test]
    fn gaussian_gradient_at_unit_offset() {
        let k = Kernel::gaussian(2).unwrap();
        let g = k.gradient(&[1.0, 0.0]).unwrap();
        let expected = -4.0 * (2.0 / PI) * (-2.0f64).exp();
        assert_relative_eq!(g[0], expected, max_relative = 1e-7);
        assert_relative_eq!(g[0], -0.3446285, max_relative = 1e-6);
        assert_eq!(g[1], 0.0);
        assert_eq!(k.gradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn moments_of_swarm_gaussian() {
        let k = Kernel::gaussian(2).unwrap();
        assert!(k.moment(1).unwrap().abs() < 1e-9);
        assert!((k.moment(0).unwrap() - 1.0).abs() < 1e-6);
        assert!((k.moment(2).unwrap() - 0.25).abs() < 1e-6);
    }

    #[test]
    fn epanechnikov_second_moment() {
        let k = Kernel::epanechnikov(2).unwrap();
        assert!((k.moment(2).unwrap() - 0.2).abs() < 1e-9);
    }

    #[test]
    fn roughness_values() {
        let k = Kernel::gaussian(2).unwrap();
        assert!((k.roughness().unwrap() - 1.0 / PI).abs() < 1e-6);
        let std1 = Kernel::standard_gaussian(1).unwrap();
        assert!((std1.roughness().unwrap() - 1.0 / (2.0 * PI.sqrt())).abs() < 1e-6);
        // 1-D Epanechnikov: int (3/4)^2 (1 - x^2)^2 = 3/5.
        let e1 = Kernel::epanechnikov(1).unwrap();
        assert!((e1.roughness().unwrap() - 0.6).abs() < 1e-9);
        for k in shipped() {
            assert!(k.roughness().unwrap() > 0.0);
        }
    }

    #[test]
    fn unit_mass_and_declared_order() {
        for k in shipped() {
            assert!((k.mass().unwrap() - 1.0).abs() < 1e-6, "{}", k.name());
            assert_eq!(k.detect_order().unwrap(), k.order());
            assert!(k.moment(2).unwrap() > 0.0);
        }
        let untruncated = Kernel::gaussian(2).unwrap().with_cutoff(None).unwrap();
        assert!((untruncated.mass().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn by_name_lookup() {
        assert_eq!(
            Kernel::by_name("gaussian", 2, None).unwrap(),
            Kernel::gaussian(2).unwrap()
        );
        assert!(Kernel::by_name("epanechnikov", 2, Some(2.0)).is_err());
        assert!(Kernel::by_name("triweight", 2, None).is_err());
    }

    #[test]
    fn fixed_bandwidth_is_verbatim() {
        let l = 1.0;
        let h = BandwidthPolicy::Fixed(l / 20.0).select(1000, 2, 2).unwrap();
        assert_eq!(h, 0.05);
    }

    #[test]
    fn rule_of_thumb_values() {
        let p = BandwidthPolicy::RuleOfThumb {
            sigma_hat: 1.0,
            c_nu: 1.0,
        };
        assert!((p.select(64, 2, 2).unwrap() - 0.5).abs() < 1e-12);
        let ratio = p.select(256, 2, 2).unwrap() / p.select(64, 2, 2).unwrap();
        assert!((ratio - 4f64.powf(-1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn bandwidth_errors() {
        let p = BandwidthPolicy::RuleOfThumb {
            sigma_hat: 0.0,
            c_nu: 1.0,
        };
        assert!(p.select(10, 2, 2).is_err());
        assert!(BandwidthPolicy::Fixed(0.1).select(0, 2, 2).is_err());
        assert!(BandwidthPolicy::Fixed(-0.1).select(5, 2, 2).is_err());
    }

    #[test]
    fn pooled_std_of_unit_cross() {
        let pts = [
            Vec2::new(1.0, 0.0),
            Vec2::new(-1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.0, -1.0),
        ];
        // Each axis: sum of squares 2 over n - 1 = 3.
        assert!((sample_std(&pts) - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(sample_std(&pts[..1]), 0.0);
    }

    proptest! {
        #[test]
        fn radial_symmetry(a in -4.0f64..4.0, b in -4.0f64..4.0) {
            for k in [Kernel::gaussian(2).unwrap(), Kernel::epanechnikov(2).unwrap()] {
                prop_assert_eq!(k.eval(&[a, b]).unwrap(), k.eval(&[-a, -b]).unwrap());
                prop_assert!(k.eval(&[a, b]).unwrap() <= k.peak());
            }
        }

        #[test]
        fn gradient_antiparallel_to_offset(a in -2.5f64..2.5, b in -2.5f64..2.5) {
            let k = Kernel::gaussian(2).unwrap();
            let g = k.gradient2(Vec2::new(a, b));
            let u = Vec2::new(a, b);
            prop_assert!(g.dot(&u) <= 0.0);
            prop_assert!((g.x * u.y - g.y * u.x).abs() <= 1e-15);
        }

        #[test]
        fn rule_of_thumb_decreases_in_n(n in 1usize..100_000) {
            let p = BandwidthPolicy::RuleOfThumb { sigma_hat: 0.3, c_nu: 1.0 };
            let a = p.select(n, 2, 2).unwrap();
            let b = p.select(n + 1, 2, 2).unwrap();
            prop_assert!(a > 0.0 && b < a);
        }
    }
}
