//! Particle simulation of the kinetic model with absorbing boundary.
//!
//! In the scaled variables the model reads
//! ∂ₜf + ε^{1−α} v·∇f = ε^{−α}(ρM − f), so a particle flies at velocity
//! ε^{1−α}v and, after an exponential waiting time of mean ε^α, redraws v
//! from M. Zero inflow means a particle is absorbed where its flight first
//! crosses ∂Ω. Crossings are located exactly with the ray oracle, so there is
//! no time-step error anywhere.
//!
//! Every particle owns a ChaCha8 stream selected by (seed, particle index); only
//! the stream position is stored, which keeps results independent of the
//! thread schedule and of how the horizon is split into snapshots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{DensityField, Grid};
use crate::equilibrium::Equilibrium;
use crate::geometry::{DomainSpec, Vec2};
use crate::scalar::{from_usize, lit, Scalar};

/// Rejection attempts per particle before the initial density is declared
/// massless on Ω.
pub const REJECTION_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("initial density has no mass inside the domain ({attempts} rejections)")]
    NoMassInside { attempts: usize },
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("cannot move backwards in time: at {now}, asked for {until}")]
    Backwards { now: f64, until: f64 },
}

/// Initial density ρ^in, restricted to Ω and normalized by rejection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialDensity<T> {
    /// Uniform on the box [lo, hi] intersected with Ω (`y` ignored in 1D).
    Uniform { lo: Vec2<T>, hi: Vec2<T> },
    /// Isotropic Gaussian truncated to Ω.
    Gaussian { mean: Vec2<T>, std: T },
    /// Piecewise constant on an nx × ny table of square cells of side `h`.
    Table {
        origin: Vec2<T>,
        h: T,
        nx: usize,
        ny: usize,
        values: Vec<T>,
    },
}

impl<T: Scalar> InitialDensity<T> {
    pub fn validate(&self, dim: usize) -> Result<(), McError> {
        let bad = |m: &str| Err(McError::Config(m.to_string()));
        match self {
            Self::Uniform { lo, hi } => {
                if !(hi.x > lo.x) || (dim == 2 && !(hi.y > lo.y)) {
                    return bad("uniform box must have positive extent");
                }
            }
            Self::Gaussian { std, .. } => {
                if !(*std > T::zero()) {
                    return bad("gaussian std must be positive");
                }
            }
            Self::Table { h, nx, ny, values, .. } => {
                if !(*h > T::zero()) || *nx == 0 || *ny == 0 || values.len() != nx * ny {
                    return bad("table needs h > 0 and nx·ny values");
                }
                if values.iter().any(|v| !(*v >= T::zero())) {
                    return bad("table values must be nonnegative");
                }
                if values.iter().all(|v| *v == T::zero()) {
                    return bad("table has no mass");
                }
            }
        }
        Ok(())
    }

    /// Unnormalized density, before restriction to Ω.
    pub fn density(&self, x: Vec2<T>, dim: usize) -> T {
        match self {
            Self::Uniform { lo, hi } => {
                let in_x = x.x >= lo.x && x.x <= hi.x;
                let in_y = dim == 1 || (x.y >= lo.y && x.y <= hi.y);
                if in_x && in_y {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Gaussian { mean, std } => {
                let d = x - *mean;
                let r2 = if dim == 1 { d.x * d.x } else { d.norm_sq() };
                (-r2 / (lit::<T>(2.0) * *std * *std)).exp()
            }
            Self::Table {
                origin,
                h,
                nx,
                ny,
                values,
            } => {
                let fi = ((x.x - origin.x) / *h).floor();
                let fj = if dim == 1 {
                    T::zero()
                } else {
                    ((x.y - origin.y) / *h).floor()
                };
                if fi < T::zero() || fj < T::zero() {
                    return T::zero();
                }
                let (i, j) = (fi.to_usize().unwrap(), fj.to_usize().unwrap());
                if i >= *nx || j >= *ny {
                    return T::zero();
                }
                values[j * nx + i]
            }
        }
    }

    /// One draw from ρ^in before the Ω test.
    fn propose<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec2<T> {
        let u = |rng: &mut R| lit::<T>(rng.random::<f64>());
        match self {
            Self::Uniform { lo, hi } => {
                let x = lo.x + (hi.x - lo.x) * u(rng);
                if dim == 1 {
                    Vec2::on_line(x)
                } else {
                    Vec2::new(x, lo.y + (hi.y - lo.y) * u(rng))
                }
            }
            Self::Gaussian { mean, std } => {
                let z = |rng: &mut R| lit::<T>(rng.sample::<f64, _>(rand_distr::StandardNormal));
                if dim == 1 {
                    Vec2::on_line(mean.x + *std * z(rng))
                } else {
                    Vec2::new(mean.x + *std * z(rng), mean.y + *std * z(rng))
                }
            }
            Self::Table {
                origin, h, nx, values, ..
            } => {
                let total = values.iter().fold(T::zero(), |s, &v| s + v);
                let mut target = total * u(rng);
                let mut cell = values.len() - 1;
                for (k, &v) in values.iter().enumerate() {
                    if target < v {
                        cell = k;
                        break;
                    }
                    target -= v;
                }
                let (i, j) = (cell % nx, cell / nx);
                let x = origin.x + *h * (from_usize::<T>(i) + u(rng));
                if dim == 1 {
                    Vec2::on_line(x)
                } else {
                    Vec2::new(x, origin.y + *h * (from_usize::<T>(j) + u(rng)))
                }
            }
        }
    }

    /// Rejection sampling against Ω.
    pub fn sample<R: Rng + ?Sized>(&self, domain: &DomainSpec<T>, rng: &mut R) -> Result<Vec2<T>, McError> {
        let dim = domain.dim();
        for _ in 0..REJECTION_CAP {
            let p = self.propose(dim, rng);
            if domain.contains(p) {
                return Ok(p);
            }
        }
        Err(McError::NoMassInside {
            attempts: REJECTION_CAP,
        })
    }

    /// Cell averages of ρ^in on `grid` (midpoint rule on `sub`^d sub-cells),
    /// exterior cells zero, rescaled to unit mass.
    pub fn field(&self, grid: &Grid<T>, sub: usize) -> DensityField<T> {
        let sub = sub.max(1);
        let ny = if grid.dim == 1 { 1 } else { sub };
        let n = from_usize::<T>(sub * ny);
        let dim = grid.dim;
        let half = lit::<T>(0.5);
        let f = DensityField::from_fn(grid.clone(), T::zero(), |c| {
            let mut s = T::zero();
            for a in 0..sub {
                for b in 0..ny {
                    let dx = (from_usize::<T>(a) + half) / from_usize::<T>(sub) - half;
                    let dy = (from_usize::<T>(b) + half) / from_usize::<T>(sub) - half;
                    let p = if dim == 1 {
                        Vec2::on_line(c.x + grid.h * dx)
                    } else {
                        Vec2::new(c.x + grid.h * dx, c.y + grid.h * dy)
                    };
                    s += self.density(p, dim);
                }
            }
            s / n
        });
        f.normalized()
    }
}

/// Per-particle stream: the same (seed, index) always gives the same draws.
pub(crate) fn particle_rng(seed: u64, index: usize, word_pos: u128) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.set_word_pos(word_pos);
    rng
}

pub(crate) fn exp1<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    lit(rng.sample::<f64, _>(Exp1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle<T> {
    pub x: Vec2<T>,
    pub v: Vec2<T>,
    pub alive: bool,
    /// Absorption time once dead.
    pub t_local: T,
    /// Absolute time of the next velocity redraw.
    pub next_collision: T,
    word_pos: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticRunConfig<T> {
    pub eps: T,
    pub alpha: T,
    pub t_final: T,
    pub n_particles: usize,
    pub seed: u64,
    pub initial_density: InitialDensity<T>,
    pub snapshot_times: Vec<T>,
}

impl<T: Scalar> KineticRunConfig<T> {
    pub fn validate(&self, dim: usize) -> Result<(), McError> {
        let bad = |m: String| Err(McError::Config(m));
        if !(self.eps > T::zero()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.alpha > T::zero() && self.alpha < lit(2.0)) {
            return bad(format!("alpha must lie in (0, 2), got {}", self.alpha));
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
        self.initial_density.validate(dim)
    }

    /// Flight speed factor ε^{1−α}.
    pub fn speed_scale(&self) -> T {
        self.eps.powf(T::one() - self.alpha)
    }

    /// Mean waiting time between collisions, ε^α.
    pub fn mean_free_time(&self) -> T {
        self.eps.powf(self.alpha)
    }
}

#[derive(Clone, Debug)]
pub struct ParticleEnsemble<T> {
    pub particles: Vec<Particle<T>>,
    pub time: T,
    pub seed: u64,
}

impl<T: Scalar> ParticleEnsemble<T> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn alive(&self) -> usize {
        self.particles.iter().filter(|p| p.alive).count()
    }

    /// Alive particles that are not inside Ω; zero unless something is broken.
    pub fn escaped(&self, domain: &DomainSpec<T>) -> usize {
        self.particles
            .iter()
            .filter(|p| p.alive && !domain.contains(p.x))
            .count()
    }
}

/// Positions from ρ^in, velocities from M, first collision clocks.
pub fn init_ensemble<T: Scalar>(
    config: &KineticRunConfig<T>,
    domain: &DomainSpec<T>,
    eq: &Equilibrium<T>,
) -> Result<ParticleEnsemble<T>, McError> {
    config.validate(domain.dim())?;
    let tau = config.mean_free_time();
    let particles = (0..config.n_particles)
        .into_par_iter()
        .map(|k| {
            let mut rng = particle_rng(config.seed, k, 0);
            let x = config.initial_density.sample(domain, &mut rng)?;
            let v = eq.sample(&mut rng);
            let next_collision = tau * exp1::<T, _>(&mut rng);
            Ok(Particle {
                x,
                v,
                alive: true,
                t_local: T::zero(),
                next_collision,
                word_pos: rng.get_word_pos(),
            })
        })
        .collect::<Result<Vec<_>, McError>>()?;
    Ok(ParticleEnsemble {
        particles,
        time: T::zero(),
        seed: config.seed,
    })
}

/// Moves one particle from `now` to `until`.
#[allow(clippy::too_many_arguments)]
pub fn advance_particle<T: Scalar, R: Rng + ?Sized>(
    p: &mut Particle<T>,
    now: T,
    until: T,
    domain: &DomainSpec<T>,
    eq: &Equilibrium<T>,
    scale: T,
    tau: T,
    rng: &mut R,
) {
    let mut t = now;
    while p.alive {
        let stop = p.next_collision.min(until);
        let u = p.v * scale;
        if domain.speed(u) > T::zero() {
            // Err only if rounding left the particle on ∂Ω: absorb it there
            let r = domain.free_path(p.x, u).unwrap_or(T::zero());
            if t + r <= stop {
                p.x = p.x + u * r;
                p.alive = false;
                p.t_local = t + r;
                return;
            }
            p.x = p.x + u * (stop - t);
        }
        t = stop;
        if p.next_collision > until {
            return;
        }
        p.v = eq.sample(rng);
        p.next_collision = p.next_collision + tau * exp1::<T, _>(rng);
    }
}

/// Advances every alive particle to `until`, in parallel.
pub fn advance<T: Scalar>(
    ensemble: &mut ParticleEnsemble<T>,
    domain: &DomainSpec<T>,
    eq: &Equilibrium<T>,
    config: &KineticRunConfig<T>,
    until: T,
) -> Result<(), McError> {
    if until < ensemble.time {
        return Err(McError::Backwards {
            now: ensemble.time.to_f64().unwrap(),
            until: until.to_f64().unwrap(),
        });
    }
    let now = ensemble.time;
    let (scale, tau, seed) = (config.speed_scale(), config.mean_free_time(), ensemble.seed);
    ensemble
        .particles
        .par_iter_mut()
        .enumerate()
        .filter(|(_, p)| p.alive)
        .for_each(|(k, p)| {
            let mut rng = particle_rng(seed, k, p.word_pos);
            advance_particle(p, now, until, domain, eq, scale, tau, &mut rng);
            p.word_pos = rng.get_word_pos();
        });
    ensemble.time = until;
    Ok(())
}

/// Histogram of alive particles with total mass = alive fraction.
pub fn estimate_density<T: Scalar>(ensemble: &ParticleEnsemble<T>, grid: &Grid<T>) -> DensityField<T> {
    let pts: Vec<Vec2<T>> = ensemble.particles.iter().filter(|p| p.alive).map(|p| p.x).collect();
    DensityField::histogram(grid.clone(), ensemble.time, &pts, ensemble.len())
}

pub fn survival_mass<T: Scalar>(ensemble: &ParticleEnsemble<T>) -> T {
    from_usize::<T>(ensemble.alive()) / from_usize::<T>(ensemble.len().max(1))
}

/// Runs the configured horizon and returns (ensemble, density snapshots, survival per snapshot).
pub fn run<T: Scalar>(
    config: &KineticRunConfig<T>,
    domain: &DomainSpec<T>,
    eq: &Equilibrium<T>,
    grid: &Grid<T>,
) -> Result<(ParticleEnsemble<T>, Vec<DensityField<T>>, Vec<T>), McError> {
    let mut ens = init_ensemble(config, domain, eq)?;
    let mut times = config.snapshot_times.clone();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut fields = Vec::with_capacity(times.len());
    let mut survival = Vec::with_capacity(times.len());
    for t in times {
        advance(&mut ens, domain, eq, config, t)?;
        let escaped = ens.escaped(domain);
        assert_eq!(escaped, 0, "{escaped} alive particles outside the domain at t = {t}");
        fields.push(estimate_density(&ens, grid));
        survival.push(survival_mass(&ens));
    }
    if ens.time < config.t_final {
        advance(&mut ens, domain, eq, config, config.t_final)?;
    }
    Ok((ens, fields, survival))
}
