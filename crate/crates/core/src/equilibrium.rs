//! Fat-tailed equilibrium velocity density.
//!
//! The density is radial and two-piece:
//!
//! ```text
//! M(v) = a                 for |v| < 1
//!      = C |v|^{-d-α}      for |v| ≥ 1
//! ```
//!
//! With tail coefficient exactly 1 the tail mass alone is |S^{d-1}|/α > 1, so a
//! unit-mass density needs C < 1. The normalized mode takes a = C (continuous
//! at |v| = 1) and solves a·|B₁| + C·|S^{d-1}|/α = 1. Every limit-operator
//! formula then carries the factor C. `PaperLiteral` keeps a = C = 1
//! and is only meant for operator experiments; its mass exceeds one.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::quadrature::{integrate, QuadConfig};
use crate::scalar::{ball_volume, lit, sphere_area, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumMode {
    #[default]
    Normalized,
    PaperLiteral,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("alpha must lie in (0, 2), got {0}")]
    AlphaOutOfRange(f64),
    #[error("dimension must be 1 or 2, got {0}")]
    Dimension(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Equilibrium<T> {
    alpha: T,
    dim: usize,
    plateau: T,
    tail: T,
    mode: EquilibriumMode,
}

impl<T: Scalar> Equilibrium<T> {
    pub fn new(alpha: T, dim: usize, mode: EquilibriumMode) -> Result<Self, EquilibriumError> {
        if !(alpha > T::zero() && alpha < lit(2.0)) {
            return Err(EquilibriumError::AlphaOutOfRange(alpha.to_f64().unwrap_or(f64::NAN)));
        }
        if dim != 1 && dim != 2 {
            return Err(EquilibriumError::Dimension(dim));
        }
        let (plateau, tail) = match mode {
            EquilibriumMode::Normalized => {
                let c = T::one() / (ball_volume::<T>(dim) + sphere_area::<T>(dim) / alpha);
                (c, c)
            }
            EquilibriumMode::PaperLiteral => (T::one(), T::one()),
        };
        Ok(Self {
            alpha,
            dim,
            plateau,
            tail,
            mode,
        })
    }

    pub fn normalized(alpha: T, dim: usize) -> Result<Self, EquilibriumError> {
        Self::new(alpha, dim, EquilibriumMode::Normalized)
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> EquilibriumMode {
        self.mode
    }

    /// Inner plateau value a.
    pub fn plateau(&self) -> T {
        self.plateau
    }

    /// C such that M(v) = C|v|^{-d-α} for |v| ≥ 1.
    pub fn tail_coefficient(&self) -> T {
        self.tail
    }

    /// Analytic total mass a·|B₁| + C·|S^{d-1}|/α.
    pub fn mass(&self) -> T {
        self.plateau * ball_volume(self.dim) + self.tail * sphere_area::<T>(self.dim) / self.alpha
    }

    /// Probability of |V| < 1 under the (mass-normalized) law.
    pub fn inner_probability(&self) -> T {
        self.plateau * ball_volume(self.dim) / self.mass()
    }

    fn speed(&self, v: Vec2<T>) -> T {
        if self.dim == 1 {
            v.x.abs()
        } else {
            v.norm()
        }
    }

    pub fn radial_density(&self, r: T) -> T {
        if r < T::one() {
            self.plateau
        } else {
            self.tail * r.powf(-(lit::<T>(self.dim as f64) + self.alpha))
        }
    }

    pub fn density(&self, v: Vec2<T>) -> T {
        self.radial_density(self.speed(v))
    }

    /// P(|V| ≤ s) for the mass-normalized law.
    pub fn speed_cdf(&self, s: T) -> T {
        if s <= T::zero() {
            return T::zero();
        }
        let d = lit::<T>(self.dim as f64);
        let m = self.mass();
        if s < T::one() {
            self.plateau * ball_volume(self.dim) * s.powf(d) / m
        } else {
            T::one() - self.tail * sphere_area::<T>(self.dim) / self.alpha * s.powf(-self.alpha) / m
        }
    }

    /// Exact draw from M/mass: uniform in the unit ball with probability p_in,
    /// otherwise a uniform direction with Pareto radius R = U^{-1/α}.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2<T> {
        let p_in = self.inner_probability().to_f64().unwrap();
        let inner = rng.random::<f64>() < p_in;
        let radius = if inner {
            let u: f64 = rng.random();
            if self.dim == 1 {
                u
            } else {
                u.sqrt()
            }
        } else {
            // 1 - U lies in (0, 1]
            let u = 1.0 - rng.random::<f64>();
            u.powf(-1.0 / self.alpha.to_f64().unwrap())
        };
        let dir = random_direction::<T, R>(self.dim, rng);
        dir * lit(radius)
    }

    /// Mass of M by adaptive radial quadrature up to |v| = 10⁶ plus the analytic
    /// remainder C·|S|·(10⁶)^{-α}/α. Used as an independent check of [`Self::mass`].
    pub fn mass_by_quadrature(&self) -> T {
        let cfg = QuadConfig::new(lit(1e-15), lit(1e-13));
        let dm1 = (self.dim - 1) as i32;
        let inner = integrate(|r: T| self.radial_density(r) * r.powi(dm1), T::zero(), T::one(), &cfg);
        let cutoff = lit::<T>(1e6);
        // log substitution r = e^u over [1, cutoff]
        let outer = integrate(
            |u: T| {
                let r = u.exp();
                self.radial_density(r) * r.powi(dm1) * r
            },
            T::zero(),
            cutoff.ln(),
            &cfg,
        );
        let remainder = self.tail * cutoff.powf(-self.alpha) / self.alpha;
        sphere_area::<T>(self.dim) * (inner.value + outer.value + remainder)
    }
}

/// Uniform direction on S^{d-1}.
pub fn random_direction<T: Scalar, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec2<T> {
    if dim == 1 {
        if rng.random::<bool>() {
            Vec2::on_line(T::one())
        } else {
            Vec2::on_line(-T::one())
        }
    } else {
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        Vec2::new(lit(theta.cos()), lit(theta.sin()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn normalized_constants() {
        let e = Equilibrium::normalized(1.0f64, 1).unwrap();
        assert!((e.tail_coefficient() - 0.25).abs() < 1e-15);
        assert!((e.density(Vec2::on_line(0.5)) - 0.25).abs() < 1e-15);
        assert!((e.density(Vec2::on_line(2.0)) - 1.0 / 16.0).abs() < 1e-15);

        let e2 = Equilibrium::normalized(1.0f64, 2).unwrap();
        assert!((e2.tail_coefficient() - 1.0 / (3.0 * PI)).abs() < 1e-15);
        // continuous at |v| = 1
        let below = e2.density(Vec2::new(1.0 - 1e-12, 0.0));
        let at = e2.density(Vec2::new(1.0, 0.0));
        assert!((below - at).abs() < 1e-12);

        let e3 = Equilibrium::normalized(0.5f64, 2).unwrap();
        assert!((e3.tail_coefficient() - 1.0 / (5.0 * PI)).abs() < 1e-15);

        let lit_mode = Equilibrium::new(0.7f64, 2, EquilibriumMode::PaperLiteral).unwrap();
        assert_eq!(lit_mode.tail_coefficient(), 1.0);
        assert!(lit_mode.mass() > 1.0);
    }

    #[test]
    fn mass_identity_against_quadrature() {
        for dim in [1, 2] {
            for alpha in [0.3f64, 0.5, 1.0, 1.5, 1.9] {
                let e = Equilibrium::normalized(alpha, dim).unwrap();
                assert!((e.mass() - 1.0).abs() < 1e-14);
                let q = e.mass_by_quadrature();
                assert!((q - 1.0).abs() < 1e-10, "dim={dim} alpha={alpha} q={q}");
            }
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(Equilibrium::normalized(0.0f64, 1).is_err());
        assert!(Equilibrium::normalized(2.0f64, 1).is_err());
        assert_eq!(Equilibrium::normalized(1.0f64, 3), Err(EquilibriumError::Dimension(3)));
    }

    #[test]
    fn inner_and_tail_frequencies() {
        let n = 100_000;
        for (dim, alpha) in [(1, 1.0), (2, 0.5), (2, 1.5)] {
            let e = Equilibrium::normalized(alpha, dim).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let speeds: Vec<f64> = (0..n).map(|_| e.speed(e.sample(&mut rng))).collect();
            let p_in = e.inner_probability();
            let k_in = speeds.iter().filter(|s| **s < 1.0).count() as f64;
            let sigma = (p_in * (1.0 - p_in) / n as f64).sqrt();
            assert!((k_in / n as f64 - p_in).abs() < 3.0 * sigma);

            let outer: Vec<_> = speeds.iter().filter(|s| **s >= 1.0).collect();
            let beyond2 = outer.iter().filter(|s| ***s > 2.0).count() as f64;
            let q = 2f64.powf(-alpha);
            let m = outer.len() as f64;
            let sigma = (q * (1.0 - q) / m).sqrt();
            assert!((beyond2 / m - q).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn sample_mean_vanishes_for_alpha_above_one() {
        let e = Equilibrium::normalized(1.5f64, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let vs: Vec<_> = (0..n).map(|_| e.sample(&mut rng)).collect();
        let mx = vs.iter().map(|v| v.x).sum::<f64>() / n as f64;
        let var = vs.iter().map(|v| (v.x - mx).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mx.abs() < 3.0 * (var / n as f64).sqrt(), "mean {mx}");
    }

    #[test]
    fn density_is_even_and_bounded() {
        let e = Equilibrium::normalized(0.8f64, 2).unwrap();
        let bound = e.plateau().max(e.tail_coefficient());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let v = Vec2::new(rng.random::<f64>() * 8.0 - 4.0, rng.random::<f64>() * 8.0 - 4.0);
            let d = e.density(v);
            assert_eq!(d, e.density(-v));
            assert!(d > 0.0 && d <= bound);
        }
    }
}
