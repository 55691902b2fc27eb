//! Heat-equation velocity feedback: `v = -D grad(phi) / f`, where
//! `phi = f - f_desired` is the density error.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::kde::DensityEstimate;
use crate::Vec2;

/// Which density divides the error gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Denominator {
    /// The agent's own estimate of the swarm density.
    Estimate,
    /// The commanded density at the agent's position.
    Desired,
}

impl Denominator {
    pub fn name(&self) -> &'static str {
        match self {
            Denominator::Estimate => "estimate",
            Denominator::Desired => "desired",
        }
    }
}

/// Default denominator floor, relative to the uniform density level.
pub const DEFAULT_FLOOR_FRACTION: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLaw {
    diffusion: f64,
    f_floor: f64,
    v_max: f64,
    denominator: Denominator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityError {
    pub phi: f64,
    pub gradient: Vec2,
}

impl ControlLaw {
    pub fn new(diffusion: f64, f_floor: f64) -> Result<Self> {
        if !(diffusion > 0.0 && diffusion.is_finite()) {
            return Err(Error::invalid("control.D", "must be positive and finite"));
        }
        if !(f_floor > 0.0 && f_floor.is_finite()) {
            return Err(Error::invalid("control.f_floor", "must be positive and finite"));
        }
        Ok(ControlLaw {
            diffusion,
            f_floor,
            v_max: f64::INFINITY,
            denominator: Denominator::Estimate,
        })
    }

    /// Caps the speed; `f64::INFINITY` disables the cap.
    pub fn with_v_max(mut self, v_max: f64) -> Result<Self> {
        if v_max.is_nan() || v_max <= 0.0 {
            return Err(Error::invalid("control.v_max", "must be positive"));
        }
        self.v_max = v_max;
        Ok(self)
    }

    pub fn with_denominator(mut self, denominator: Denominator) -> Self {
        self.denominator = denominator;
        self
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn f_floor(&self) -> f64 {
        self.f_floor
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn denominator(&self) -> Denominator {
        self.denominator
    }

    /// `-D * grad_phi / max(density, f_floor)`, then capped at `v_max`.
    #[inline]
    pub fn velocity(&self, grad_phi: Vec2, density: f64) -> Vec2 {
        let v = grad_phi * (-self.diffusion / density.max(self.f_floor));
        let speed = v.norm();
        if speed > self.v_max {
            v * (self.v_max / speed)
        } else {
            v
        }
    }

    /// Velocity of an agent at `x` holding estimate `est`.
    pub fn agent_velocity(&self, est: &DensityEstimate, desired: &ScalarField, x: Vec2) -> Vec2 {
        let err = density_error(est, desired, x);
        let denom = match self.denominator {
            Denominator::Estimate => est.value,
            Denominator::Desired => desired.sample(x),
        };
        self.velocity(err.gradient, denom)
    }
}

pub fn density_error(est: &DensityEstimate, desired: &ScalarField, x: Vec2) -> DensityError {
    DensityError {
        phi: est.value - desired.sample(x),
        gradient: est.gradient - desired.gradient(x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Domain;
    use crate::kde::{Estimator, Method, SwarmState};
    use crate::kernels::Kernel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_tracking_has_zero_error() {
        let desired = ScalarField::from_fn(Domain::unit_square(), 8, 8, |p| 1.0 + 0.25 * p.x).unwrap();
        let x = Vec2::new(0.4, 0.6);
        let est = DensityEstimate {
            value: desired.sample(x),
            gradient: desired.gradient(x),
        };
        let e = density_error(&est, &desired, x);
        assert_eq!(e.phi, 0.0);
        assert_eq!(e.gradient, Vec2::zeros());
    }

    #[test]
    fn error_arithmetic() {
        let desired = ScalarField::uniform(Domain::unit_square(), 4, 4).unwrap();
        let est = DensityEstimate {
            value: 1.2,
            gradient: Vec2::new(0.3, 0.0),
        };
        let e = density_error(&est, &desired, Vec2::new(0.5, 0.5));
        assert!((e.phi - 0.2).abs() < 1e-15);
        assert_eq!(e.gradient, Vec2::new(0.3, 0.0));
    }

    #[test]
    fn velocity_examples() {
        let law = ControlLaw::new(5.0, 0.01).unwrap();
        assert_eq!(law.velocity(Vec2::zeros(), 3.0), Vec2::zeros());
        let v = law.velocity(Vec2::new(0.1, -0.2), 1.0);
        assert!((v - Vec2::new(-0.5, 1.0)).norm() < 1e-15);
        let g = Vec2::new(0.3, 0.4);
        let clamped = law.velocity(g, 1e-6);
        assert!((clamped.norm() - 5.0 * 0.5 / 0.01).abs() < 1e-9);
    }

    #[test]
    fn speed_cap_and_validation() {
        let law = ControlLaw::new(5.0, 0.01).unwrap().with_v_max(0.5).unwrap();
        let v = law.velocity(Vec2::new(10.0, 0.0), 1.0);
        assert!((v.norm() - 0.5).abs() < 1e-15);
        assert!(ControlLaw::new(-1.0, 0.01).is_err());
        assert!(ControlLaw::new(1.0, 0.0).is_err());
        assert!(ControlLaw::new(1.0, 0.1).unwrap().with_v_max(0.0).is_err());
    }

    #[test]
    fn denominator_switch() {
        let desired = ScalarField::constant(Domain::unit_square(), 4, 4, 2.0).unwrap();
        let est = DensityEstimate {
            value: 0.5,
            gradient: Vec2::new(1.0, 0.0),
        };
        let x = Vec2::new(0.5, 0.5);
        let by_est = ControlLaw::new(1.0, 0.01).unwrap();
        let by_des = by_est.with_denominator(Denominator::Desired);
        assert!((by_est.agent_velocity(&est, &desired, x).x + 2.0).abs() < 1e-15);
        assert!((by_des.agent_velocity(&est, &desired, x).x + 0.5).abs() < 1e-15);
    }

    /// Mean |phi| at agents: a swarm drawn from the target beats a uniform one.
    #[test]
    fn sampled_swarm_tracks_better_than_uniform() {
        let dom = Domain::unit_square();
        let target = |p: Vec2| {
            let a = (-(p - Vec2::new(0.3, 0.3)).norm_squared() / (2.0 * 0.01)).exp();
            let b = (-(p - Vec2::new(0.7, 0.65)).norm_squared() / (2.0 * 0.01)).exp();
            a + b + 0.05
        };
        let desired = ScalarField::from_fn(dom, 128, 128, target)
            .unwrap()
            .normalize()
            .unwrap();
        let peak = desired.min_max().1;
        let k = Kernel::gaussian(2).unwrap();
        let mean_abs_phi = |s: &SwarmState| {
            let est = Estimator::new(s, &k, 0.05, Method::Grid).unwrap();
            let total: f64 = s
                .positions()
                .iter()
                .map(|&x| density_error(&est.estimate(x), &desired, x).phi.abs())
                .sum();
            total / s.len() as f64
        };
        let (mut sampled, mut uniform) = (0.0, 0.0);
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 4000;
            let u: Vec<Vec2> = (0..n).map(|_| Vec2::new(rng.random(), rng.random())).collect();
            let mut d = Vec::with_capacity(n);
            while d.len() < n {
                let p = Vec2::new(rng.random(), rng.random());
                if rng.random::<f64>() * peak <= desired.sample(p) {
                    d.push(p);
                }
            }
            uniform += mean_abs_phi(&SwarmState::new(u, 0.0).unwrap());
            sampled += mean_abs_phi(&SwarmState::new(d, 0.0).unwrap());
        }
        assert!(sampled < uniform, "sampled {sampled} vs uniform {uniform}");
    }

    proptest! {
        #[test]
        fn linear_in_diffusion(gx in -5.0f64..5.0, gy in -5.0f64..5.0, f in 0.0f64..10.0, d in 0.1f64..20.0) {
            let a = ControlLaw::new(d, 0.01).unwrap().velocity(Vec2::new(gx, gy), f);
            let b = ControlLaw::new(2.0 * d, 0.01).unwrap().velocity(Vec2::new(gx, gy), f);
            prop_assert_eq!(b, a * 2.0);
        }

        #[test]
        fn descends_the_error(gx in -5.0f64..5.0, gy in -5.0f64..5.0, f in 0.0f64..10.0) {
            let g = Vec2::new(gx, gy);
            let v = ControlLaw::new(5.0, 0.01).unwrap().velocity(g, f);
            prop_assert!(v.dot(&g) <= 0.0);
            if g != Vec2::zeros() {
                prop_assert!(v.dot(&g) < 0.0);
            }
        }
    }
}
