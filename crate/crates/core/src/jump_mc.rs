//! The limit process: isotropic heavy-tailed jumps along straight lines,
//! killed as soon as an attempted jump segment leaves Ω.
//!
//! Jumps shorter than `r_min` are dropped. The remaining kernel
//! Γ(α+1)|w|^{−d−α} on {|w| > r_min} has finite mass λ, so jump attempts form a
//! Poisson clock of rate λ with Pareto lengths. Attempts that would leave the
//! visible set S_Ω(x) arrive at rate Γ(α+1)∫_{ℝ^d∖S_Ω(x)}|w|^{−d−α}, which
//! equals h_α(x) once r_min is below the distance to the boundary. Killing at
//! an attempted exit therefore reproduces −h_α without evaluating it.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{DensityField, Grid};
use crate::equilibrium::random_direction;
use crate::geometry::{DomainSpec, Vec2};
use crate::kinetic_mc::{exp1, particle_rng, InitialDensity, McError};
use crate::scalar::{from_usize, gamma, lit, sphere_area, Scalar};

/// λ = Γ(α)·|S^{d−1}|·r_min^{−α}.
pub fn event_rate<T: Scalar>(alpha: T, r_min: T, dim: usize) -> T {
    gamma(alpha) * sphere_area::<T>(dim) * r_min.powf(-alpha)
}

/// Uniform direction, Pareto length R = r_min·U^{−1/α}.
pub fn sample_jump<T: Scalar, R: Rng + ?Sized>(rng: &mut R, alpha: T, r_min: T, dim: usize) -> Vec2<T> {
    let u = 1.0 - rng.random::<f64>();
    let radius = r_min * lit::<T>(u).powf(-T::one() / alpha);
    random_direction::<T, R>(dim, rng) * radius
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRunConfig<T> {
    pub alpha: T,
    pub r_min: T,
    pub t_final: T,
    pub n_particles: usize,
    pub seed: u64,
    pub snapshot_times: Vec<T>,
    pub initial_density: InitialDensity<T>,
}

impl<T: Scalar> JumpRunConfig<T> {
    pub fn validate(&self, domain: &DomainSpec<T>) -> Result<(), McError> {
        let bad = |m: String| Err(McError::Config(m));
        if !(self.alpha > T::zero() && self.alpha < lit(2.0)) {
            return bad(format!("alpha must lie in (0, 2), got {}", self.alpha));
        }
        if !(self.r_min > T::zero()) {
            return bad(format!("r_min must be positive, got {}", self.r_min));
        }
        if self.n_particles == 0 {
            return bad("n_particles must be at least 1".into());
        }
        if self
            .snapshot_times
            .iter()
            .any(|&t| !(t >= T::zero() && t <= self.t_final))
        {
            return bad("snapshot times must lie in [0, t_final]".into());
        }
        if self.r_min * lit(10.0) >= domain.inradius() {
            log::warn!(
                "r_min = {} is not below a tenth of the inradius; truncation bias will be visible",
                self.r_min
            );
        }
        self.initial_density.validate(domain.dim())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Walker<T> {
    /// Current site; after a kill, the last interior site.
    pub x: Vec2<T>,
    pub alive: bool,
    /// Kill time once dead.
    pub t_local: T,
    pub next_event: T,
    word_pos: u128,
}

#[derive(Clone, Debug)]
pub struct WalkerEnsemble<T> {
    pub walkers: Vec<Walker<T>>,
    pub time: T,
    pub seed: u64,
}

impl<T: Scalar> WalkerEnsemble<T> {
    pub fn len(&self) -> usize {
        self.walkers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walkers.is_empty()
    }

    pub fn alive(&self) -> usize {
        self.walkers.iter().filter(|w| w.alive).count()
    }

    pub fn survival_mass(&self) -> T {
        from_usize::<T>(self.alive()) / from_usize::<T>(self.len().max(1))
    }

    pub fn density(&self, grid: &Grid<T>) -> DensityField<T> {
        let pts: Vec<Vec2<T>> = self.walkers.iter().filter(|w| w.alive).map(|w| w.x).collect();
        DensityField::histogram(grid.clone(), self.time, &pts, self.len())
    }
}

pub fn init_ensemble<T: Scalar>(
    config: &JumpRunConfig<T>,
    domain: &DomainSpec<T>,
) -> Result<WalkerEnsemble<T>, McError> {
    config.validate(domain)?;
    let rate = event_rate(config.alpha, config.r_min, domain.dim());
    let walkers = (0..config.n_particles)
        .into_par_iter()
        .map(|k| {
            let mut rng = particle_rng(config.seed, k, 0);
            let x = config.initial_density.sample(domain, &mut rng)?;
            let next_event = exp1::<T, _>(&mut rng) / rate;
            Ok(Walker {
                x,
                alive: true,
                t_local: T::zero(),
                next_event,
                word_pos: rng.get_word_pos(),
            })
        })
        .collect::<Result<Vec<_>, McError>>()?;
    Ok(WalkerEnsemble {
        walkers,
        time: T::zero(),
        seed: config.seed,
    })
}

pub fn advance_walker<T: Scalar, R: Rng + ?Sized>(
    w: &mut Walker<T>,
    until: T,
    domain: &DomainSpec<T>,
    alpha: T,
    r_min: T,
    rate: T,
    rng: &mut R,
) {
    let dim = domain.dim();
    while w.alive && w.next_event <= until {
        let jump = sample_jump(rng, alpha, r_min, dim);
        let target = w.x + jump;
        if domain.segment_inside(w.x, target) {
            w.x = target;
        } else {
            w.alive = false;
            w.t_local = w.next_event;
            return;
        }
        w.next_event = w.next_event + exp1::<T, _>(rng) / rate;
    }
}

pub fn advance<T: Scalar>(
    ensemble: &mut WalkerEnsemble<T>,
    domain: &DomainSpec<T>,
    config: &JumpRunConfig<T>,
    until: T,
) -> Result<(), McError> {
    if until < ensemble.time {
        return Err(McError::Backwards {
            now: ensemble.time.to_f64().unwrap(),
            until: until.to_f64().unwrap(),
        });
    }
    let rate = event_rate(config.alpha, config.r_min, domain.dim());
    let seed = ensemble.seed;
    ensemble
        .walkers
        .par_iter_mut()
        .enumerate()
        .filter(|(_, w)| w.alive)
        .for_each(|(k, w)| {
            let mut rng = particle_rng(seed, k, w.word_pos);
            advance_walker(w, until, domain, config.alpha, config.r_min, rate, &mut rng);
            w.word_pos = rng.get_word_pos();
        });
    ensemble.time = until;
    Ok(())
}

/// Runs the configured horizon; returns density and survival per snapshot.
pub fn run<T: Scalar>(
    config: &JumpRunConfig<T>,
    domain: &DomainSpec<T>,
    grid: &Grid<T>,
) -> Result<(WalkerEnsemble<T>, Vec<DensityField<T>>, Vec<T>), McError> {
    let mut ens = init_ensemble(config, domain)?;
    let mut times = config.snapshot_times.clone();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut fields = Vec::with_capacity(times.len());
    let mut survival = Vec::with_capacity(times.len());
    for t in times {
        advance(&mut ens, domain, config, t)?;
        fields.push(ens.density(grid));
        survival.push(ens.survival_mass());
    }
    if ens.time < config.t_final {
        advance(&mut ens, domain, config, config.t_final)?;
    }
    Ok((ens, fields, survival))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HazardEstimate<T> {
    pub value: T,
    pub std_error: T,
    pub exit_fraction: T,
}

/// λ times the fraction of sampled jumps from `x` that leave S_Ω(x).
pub fn empirical_kill_hazard<T: Scalar, R: Rng + ?Sized>(
    domain: &DomainSpec<T>,
    x: Vec2<T>,
    alpha: T,
    r_min: T,
    n_trials: usize,
    rng: &mut R,
) -> HazardEstimate<T> {
    let dim = domain.dim();
    let exits = (0..n_trials)
        .filter(|_| !domain.segment_inside(x, x + sample_jump(rng, alpha, r_min, dim)))
        .count();
    let n = from_usize::<T>(n_trials.max(1));
    let p = from_usize::<T>(exits) / n;
    let rate = event_rate(alpha, r_min, dim);
    HazardEstimate {
        value: rate * p,
        std_error: rate * (p * (T::one() - p) / n).sqrt(),
        exit_fraction: p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rates() {
        assert!((event_rate(1.0f64, 0.01, 1) - 200.0).abs() < 1e-9);
        assert!((event_rate(1.0f64, 0.1, 2) - 20.0 * std::f64::consts::PI).abs() < 1e-9);
        let a = 1.3f64;
        let ratio = event_rate(a, 0.05, 2) / event_rate(a, 0.1, 2);
        assert!((ratio - 2f64.powf(a)).abs() < 1e-12);
    }

    #[test]
    fn pareto_tail_and_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let alpha = 0.8;
        let mut above = 0;
        let mut mean = Vec2::<f64>::zero();
        for _ in 0..n {
            let w = sample_jump(&mut rng, alpha, 0.01, 2);
            let r = w.norm();
            assert!(r >= 0.01 * (1.0 - 1e-12));
            if r > 0.02 {
                above += 1;
            }
            mean += w * (1.0 / r);
        }
        let p = above as f64 / n as f64;
        let q = 2f64.powf(-alpha);
        assert!((p - q).abs() < 3.0 * (q * (1.0 - q) / n as f64).sqrt());
        let sd = (0.5 / n as f64).sqrt();
        assert!(mean.x.abs() / (n as f64) < 3.0 * sd);
        assert!(mean.y.abs() / (n as f64) < 3.0 * sd);
    }

    #[test]
    fn hidden_target_kills_on_the_l_shape() {
        let l = DomainSpec::<f64>::l_shape();
        let x = Vec2::new(1.8, 0.5);
        let y = Vec2::new(0.5, 1.8);
        assert!(l.contains(y));
        assert!(!l.segment_inside(x, y));
        let mut w = Walker {
            x,
            alive: true,
            t_local: 0.0,
            next_event: 0.0,
            word_pos: 0,
        };
        // r_min beyond the diameter: every attempt leaves Ω
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        advance_walker(&mut w, 1.0, &l, 1.0, 5.0, 1.0, &mut rng);
        assert!(!w.alive);
        assert_eq!(w.x, x);
        assert_eq!(w.t_local, 0.0);
    }

    #[test]
    fn long_truncation_means_hazard_equals_rate() {
        let iv = DomainSpec::<f64>::interval(-1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = empirical_kill_hazard(&iv, Vec2::on_line(0.0), 1.0, 2.5, 1000, &mut rng);
        assert_eq!(h.exit_fraction, 1.0);
        assert!((h.value - event_rate(1.0, 2.5, 1)).abs() < 1e-12);
    }

    #[test]
    fn survival_decreases_and_nobody_escapes() {
        let disk = DomainSpec::<f64>::unit_disk();
        let cfg = JumpRunConfig {
            alpha: 1.2,
            r_min: 0.01,
            t_final: 0.2,
            n_particles: 2000,
            seed: 9,
            snapshot_times: vec![0.05, 0.1, 0.2],
            initial_density: InitialDensity::Gaussian {
                mean: Vec2::zero(),
                std: 0.3,
            },
        };
        let grid = Grid::covering(&disk, 16);
        let (ens, fields, survival) = run(&cfg, &disk, &grid).unwrap();
        assert!(survival.windows(2).all(|w| w[1] <= w[0]));
        assert!(survival[2] < 1.0);
        assert!(ens.walkers.iter().all(|w| disk.contains(w.x)));
        assert!((fields[2].mass() - survival[2]).abs() < 1e-12);
    }
}
