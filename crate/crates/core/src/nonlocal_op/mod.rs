//! Pointwise evaluation of the limit operator: the killing rate h_α, the
//! star-restricted nonlocal operator L_α, the generator −h_α φ + L_α φ, its
//! complement and restricted-Laplacian forms, and the adjoint kinetic solution χ_ε.
//!
//! Everything is computed in polar coordinates around `x` with the angular rule
//! from [`angular_rule`]. Directions `k` and `k + n/2` are antipodal, which is
//! what the principal-value pairing relies on.

mod adjoint;

pub use adjoint::{chi_defect, chi_eps, lemma2_norms, lemma3_lhs, lemma3_reference, Lemma2Norms, Lemma3Value};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angular_rule, DomainSpec, GeometryError, Vec2};
use crate::quadrature::{integrate, QuadConfig};
use crate::scalar::{gamma, lit, Scalar};
use crate::test_function::TestFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid operator parameters: {0}")]
    Params(String),
    #[error("alpha must lie in (0, 2), got {0}")]
    Alpha(f64),
    #[error("one-sided evaluation diverges for alpha >= 1 when the gradient is nonzero")]
    UnpairedDivergence,
}

/// Constant in front of the restricted fractional Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum Prefactor<T> {
    /// Γ(α + 1), the constant carried by the limit operator.
    #[default]
    Theorem,
    Custom(T),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorParams<T> {
    /// Angular directions in 2D (even, at least 16). Ignored in 1D.
    pub n_dir: usize,
    /// Tolerances of the per-direction radial integrals.
    pub radial: QuadConfig<T>,
    /// Pair antipodal directions inside ρ₀ so the integrand is a second difference.
    pub pv_pairing: bool,
    pub prefactor: Prefactor<T>,
}

impl<T: Scalar> Default for OperatorParams<T> {
    fn default() -> Self {
        Self {
            n_dir: 512,
            radial: QuadConfig::new(lit(1e-14), lit(1e-11)),
            pv_pairing: true,
            prefactor: Prefactor::Theorem,
        }
    }
}

impl<T: Scalar> OperatorParams<T> {
    pub fn with_n_dir(mut self, n_dir: usize) -> Self {
        self.n_dir = n_dir;
        self
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        if self.n_dir < 16 || self.n_dir % 2 != 0 {
            return Err(OperatorError::Params(format!(
                "n_dir must be even and at least 16, got {}",
                self.n_dir
            )));
        }
        if !(self.radial.abs_tol > T::zero() && self.radial.rel_tol > T::zero()) {
            return Err(OperatorError::Params("radial tolerances must be positive".into()));
        }
        Ok(())
    }

    fn prefactor_value(&self, alpha: T) -> T {
        match self.prefactor {
            Prefactor::Theorem => gamma(alpha + T::one()),
            Prefactor::Custom(c) => c,
        }
    }
}

/// Operator value with the summed quadrature error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

impl<T: Scalar> Estimate<T> {
    fn zero() -> Self {
        Self {
            value: T::zero(),
            error: T::zero(),
        }
    }

    fn add(&mut self, value: T, error: T) {
        self.value += value;
        self.error += error;
    }

    fn scaled(self, c: T) -> Self {
        Self {
            value: self.value * c,
            error: self.error * c.abs(),
        }
    }
}

/// One direction of the angular rule with its visibility distance d(x, σ).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Ray<T> {
    pub sigma: Vec2<T>,
    pub weight: T,
    pub dist: T,
}

pub(crate) fn check_alpha<T: Scalar>(alpha: T) -> Result<(), OperatorError> {
    if alpha > T::zero() && alpha < lit(2.0) {
        Ok(())
    } else {
        Err(OperatorError::Alpha(alpha.to_f64().unwrap_or(f64::NAN)))
    }
}

pub(crate) fn rays<T: Scalar>(
    domain: &DomainSpec<T>,
    x: Vec2<T>,
    params: &OperatorParams<T>,
) -> Result<Vec<Ray<T>>, OperatorError> {
    if domain.dim() == 2 {
        params.validate()?;
    }
    if !domain.contains(x) {
        return Err(GeometryError::NotInterior.into());
    }
    angular_rule::<T>(domain.dim(), params.n_dir)
        .into_iter()
        .map(|(sigma, weight)| {
            Ok(Ray {
                sigma,
                weight,
                dist: domain.exit_distance(x, sigma)?,
            })
        })
        .collect()
}

/// ρ₀(x) = min(δ(x), min_σ d(x, σ)).
fn pairing_radius<T: Scalar>(domain: &DomainSpec<T>, x: Vec2<T>, rays: &[Ray<T>]) -> T {
    rays.iter().fold(domain.boundary_gap(x), |m, r| m.min(r.dist))
}

/// h_α(x) = Γ(α) Σ_k w_k d(x, σ_k)^{-α}.
pub fn h_alpha<T: Scalar>(
    domain: &DomainSpec<T>,
    x: Vec2<T>,
    alpha: T,
    params: &OperatorParams<T>,
) -> Result<T, OperatorError> {
    check_alpha(alpha)?;
    let rays = rays(domain, x, params)?;
    Ok(gamma(alpha) * weighted_inverse_power(&rays, alpha))
}

fn weighted_inverse_power<T: Scalar>(rays: &[Ray<T>], alpha: T) -> T {
    rays.iter().fold(T::zero(), |s, r| s + r.weight * r.dist.powf(-alpha))
}

/// ∫₀^∞ η^{-1-α} e^{-d/η} dη by adaptive quadrature (η = d·e^s).
///
/// Closed form: Γ(α) d^{-α}. Kept numeric as the independent check of the
/// radial reduction behind [`h_alpha`].
pub fn radial_kernel_integral<T: Scalar>(d: T, alpha: T) -> T {
    let cfg = QuadConfig::new(T::min_positive_value(), lit(1e-13)).with_panels(4);
    let f = |s: T| (-alpha * s - (-s).exp()).exp();
    // e^{-e^6} underflows; e^{-α s} is below 1e-22 past s = 50/α
    let lower = integrate(f, lit(-6.0), T::zero(), &cfg);
    let upper = integrate(f, T::zero(), lit::<T>(50.0) / alpha, &cfg);
    d.powf(-alpha) * (lower.value + upper.value)
}

/// h_α through the unreduced kernel: Σ_k w_k ∫₀^∞ η^{-1-α} e^{-d_k/η} dη.
pub fn h_alpha_by_quadrature<T: Scalar>(
    domain: &DomainSpec<T>,
    x: Vec2<T>,
    alpha: T,
    params: &OperatorParams<T>,
) -> Result<T, OperatorError> {
    check_alpha(alpha)?;
    let rays = rays(domain, x, params)?;
    Ok(rays
        .iter()
        .fold(T::zero(), |s, r| s + r.weight * radial_kernel_integral(r.dist, alpha)))
}

/// Γ(α+1) Σ_k w_k ∫_{d_k}^∞ r^{-1-α} dr, the kernel mass outside S_Ω(x), by
/// quadrature (r = d·e^s). Equals h_α(x) analytically.
pub fn complement_kernel_mass<T: Scalar>(
    domain: &DomainSpec<T>,
    x: Vec2<T>,
    alpha: T,
    params: &OperatorParams<T>,
) -> Result<T, OperatorError> {
    check_alpha(alpha)?;
    let rays = rays(domain, x, params)?;
    Ok(gamma(alpha + T::one()) * complement_radial(&rays, alpha))
}

fn complement_radial<T: Scalar>(rays: &[Ray<T>], alpha: T) -> T {
    let cfg = QuadConfig::new(T::min_positive_value(), lit(1e-13)).with_panels(4);
    // ∫_d^∞ r^{-1-α} dr = d^{-α} ∫_0^∞ e^{-α s} ds
    let unit = integrate(|s: T| (-alpha * s).exp(), T::zero(), lit::<T>(45.0) / alpha, &cfg).value;
    rays.iter()
        .fold(T::zero(), |s, r| s + r.weight * r.dist.powf(-alpha) * unit)
}

/// Star part Σ_k w_k PV∫₀^{d_k} (φ(x + rσ_k) − φ(x)) r^{-1-α} dr, no prefactor.
fn star_integral<T: Scalar>(
    domain: &DomainSpec<T>,
    phi: &TestFunction<T>,
    x: Vec2<T>,
    alpha: T,
    params: &OperatorParams<T>,
    rays: &[Ray<T>],
) -> Result<Estimate<T>, OperatorError> {
    let jet = phi.jet(x);
    let phi0 = jet.value;
    let cfg = params.radial.with_panels(params.radial.initial_panels.max(4));
    let mut out = Estimate::zero();
    let two = lit::<T>(2.0);
    let hess_quad = |s: Vec2<T>| {
        let h = jet.hess;
        s.x * s.x * h[0][0] + two * s.x * s.y * h[0][1] + s.y * s.y * h[1][1]
    };

    if params.pv_pairing {
        let rho0 = pairing_radius(domain, x, rays);
        // below r_t the second difference is replaced by its Taylor term r²σᵀHσ
        let r_t = lit::<T>(1e-3) * rho0;
        let half = rays.len() / 2;
        for k in 0..half {
            let ray = rays[k];
            let s = ray.sigma;
            let taylor = hess_quad(s) * r_t.powf(two - alpha) / (two - alpha);
            let core = integrate(
                |u: T| {
                    let r = r_t * u.exp();
                    let d2 = phi.value(x + s * r) + phi.value(x - s * r) - two * phi0;
                    d2 * r.powf(-alpha)
                },
                T::zero(),
                (rho0 / r_t).ln(),
                &cfg,
            );
            out.add(ray.weight * (taylor + core.value), ray.weight * core.error);
        }
        for ray in rays {
            let tail = one_sided(phi, x, phi0, ray.sigma, rho0, ray.dist, alpha, &cfg);
            out.add(ray.weight * tail.value, ray.weight * tail.error);
        }
    } else {
        let grad = jet.grad;
        for ray in rays {
            let s = ray.sigma;
            let slope = if domain.dim() == 1 { grad.x * s.x } else { grad.dot(s) };
            let sloped = slope.abs() > T::epsilon() * (T::one() + phi0.abs());
            // a first difference keeps its digits much closer to x than a second one
            let r_t = lit::<T>(if sloped { 1e-5 } else { 1e-3 }) * ray.dist;
            let mut taylor = hess_quad(s) / two * r_t.powf(two - alpha) / (two - alpha);
            if sloped {
                if alpha >= T::one() {
                    return Err(OperatorError::UnpairedDivergence);
                }
                taylor += slope * r_t.powf(T::one() - alpha) / (T::one() - alpha);
            }
            let rest = one_sided(phi, x, phi0, s, r_t, ray.dist, alpha, &cfg);
            out.add(ray.weight * (taylor + rest.value), ray.weight * rest.error);
        }
    }
    Ok(out)
}

/// ∫_{r0}^{r1} (φ(x + rσ) − φ₀) r^{-1-α} dr with r = r0·e^u.
#[allow(clippy::too_many_arguments)]
fn one_sided<T: Scalar>(
    phi: &TestFunction<T>,
    x: Vec2<T>,
    phi0: T,
    sigma: Vec2<T>,
    r0: T,
    r1: T,
    alpha: T,
    cfg: &QuadConfig<T>,
) -> Estimate<T> {
    if r1 <= r0 {
        return Estimate::zero();
    }
    let q = integrate(
        |u: T| {
            let r = r0 * u.exp();
            (phi.value(x + sigma * r) - phi0) * r.powf(-alpha)
        },
        T::zero(),
        (r1 / r0).ln(),
        cfg,
    );
    Estimate {
        value: q.value,
        error: q.error,
    }
}

fn warn_if_loose<T: Scalar>(what: &str, e: &Estimate<T>) {
    if e.error > lit::<T>(0.01) * e.value.abs() && e.error > lit(1e-10) {
        log::warn!(
            "{what}: quadrature error estimate {:e} exceeds 1% of value {:e}",
            e.error,
            e.value
        );
    }
}

/// L_α(φ)(x) with its quadrature error estimate.
pub fn l_alpha_estimate<T: Scalar>(
    domain: &DomainSpec<T>,
    phi: &TestFunction<T>,
    x: Vec2<T>,
    alpha: T,
    params: &OperatorParams<T>,
) -> Result<Estimate<T>, OperatorError> {
    check_alpha(alpha)?;
    let rays = rays(domain, x, params)?;
    let e = star_integral(domain, phi, x, alpha, params, &rays)?.scaled(gamma(alpha + T::one()));
    warn_if_loose("L_alpha", &e);
    Ok(e)
}

/// L_α(φ)(x) = Γ(α+1) PV∫_{S_Ω(x)} (φ(y) − φ(x)) |x − y|^{-d-α} dy.
pub fn l_alpha<T: Scalar>(
    domain: &DomainSpec<T>,
    phi: &TestFunction<T>,
    x: Vec2<T>,
    alpha: T,
    params: &OperatorParams<T>,
) -> Result<T, OperatorError> {
    l_alpha_estimate(domain, phi, x, alpha, params).map(|e| e.value)
}

/// −h_α(x)φ(x) + L_α(φ)(x).
pub fn generator<T: Scalar>(
    domain: &DomainSpec<T>,
    phi: &TestFunction<T>,
    x: Vec2<T>,
    alpha: T,
    params: &OperatorParams<T>,
) -> Result<T, OperatorError> {
    let h = h_alpha(domain, x, alpha, params)?;
    let l = l_alpha(domain, phi, x, alpha, params)?;
    Ok(l - h * phi.value(x))
}

/// Γ(α+1) PV∫_{ℝ^d} (φ(y)1_{S_Ω(x)}(y) − φ(x)) |x − y|^{-d-α} dy, with the
/// complement part integrated numerically rather than through h_α.
pub fn complement_form<T: Scalar>(
    domain: &DomainSpec<T>,
    phi: &TestFunction<T>,
    x: Vec2<T>,
    alpha: T,
    params: &OperatorParams<T>,
) -> Result<T, OperatorError> {
    check_alpha(alpha)?;
    let rays = rays(domain, x, params)?;
    let star = star_integral(domain, phi, x, alpha, params, &rays)?;
    let outside = complement_radial(&rays, alpha);
    Ok(gamma(alpha + T::one()) * (star.value - phi.value(x) * outside))
}

/// c·PV∫_{ℝ^d} (φ(y)1_Ω(y) − φ(x)) |x − y|^{-d-α} dy with c from the params.
///
/// Differs from [`complement_form`] only where a ray leaves Ω and re-enters it:
/// those later pieces see φ here but not in the star-restricted operator.
pub fn restricted_form<T: Scalar>(
    domain: &DomainSpec<T>,
    phi: &TestFunction<T>,
    x: Vec2<T>,
    alpha: T,
    params: &OperatorParams<T>,
) -> Result<T, OperatorError> {
    check_alpha(alpha)?;
    let rays = rays(domain, x, params)?;
    let star = star_integral(domain, phi, x, alpha, params, &rays)?;
    let cfg = params.radial.with_panels(8);
    let mut hidden = T::zero();
    for ray in &rays {
        let pieces = domain.ray_inside_intervals(x, ray.sigma)?;
        for &(t0, t1) in pieces.iter().skip(1) {
            let q = integrate(
                |u: T| {
                    let r = t0 * u.exp();
                    phi.value(x + ray.sigma * r) * r.powf(-alpha)
                },
                T::zero(),
                (t1 / t0).ln(),
                &cfg,
            );
            hidden += ray.weight * q.value;
        }
    }
    let outside = complement_radial(&rays, alpha);
    Ok(params.prefactor_value(alpha) * (star.value + hidden - phi.value(x) * outside))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn p(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    fn params() -> OperatorParams<f64> {
        OperatorParams::default()
    }

    #[test]
    fn kernel_identity_against_gamma() {
        for alpha in [0.3f64, 0.5, 1.0, 1.5, 1.9] {
            for d in [0.01f64, 0.7, 1.0, 3.0] {
                let q = radial_kernel_integral(d, alpha);
                let exact = gamma(alpha) * d.powf(-alpha);
                assert!(((q - exact) / exact).abs() < 1e-8, "alpha={alpha} d={d}");
            }
        }
    }

    #[test]
    fn h_alpha_examples() {
        let iv = DomainSpec::<f64>::interval(-1.0, 1.0).unwrap();
        let h = h_alpha(&iv, Vec2::on_line(0.0), 1.0, &params()).unwrap();
        assert!((h - 2.0).abs() < 1e-14);

        let disk = DomainSpec::unit_disk();
        for alpha in [0.5f64, 1.0, 1.5] {
            let h = h_alpha(&disk, p(0.0, 0.0), alpha, &params()).unwrap();
            assert!((h - 2.0 * PI * gamma(alpha)).abs() < 1e-11);
        }

        let moved = DomainSpec::disk(p(3.0, 4.0), 1.0).unwrap();
        let a = h_alpha(&disk, p(0.3, -0.2), 1.2, &params()).unwrap();
        let b = h_alpha(&moved, p(3.3, 3.8), 1.2, &params()).unwrap();
        assert!(((a - b) / a).abs() < 1e-10);

        assert!(h_alpha(&disk, p(2.0, 0.0), 1.0, &params()).is_err());
    }

    #[test]
    fn h_alpha_quadrature_route_matches() {
        let l = DomainSpec::l_shape();
        let x = p(0.4, 0.3);
        let a = h_alpha(&l, x, 0.7, &params()).unwrap();
        let b = h_alpha_by_quadrature(&l, x, 0.7, &params()).unwrap();
        assert!(((a - b) / a).abs() < 1e-8);
    }

    #[test]
    fn interval_example_values() {
        let iv = DomainSpec::<f64>::interval(-1.0, 1.0).unwrap();
        let phi = TestFunction::interval_bump(0.0, 1.0);
        let l = l_alpha(&iv, &phi, Vec2::on_line(0.0), 1.0, &params()).unwrap();
        assert!((l + 10.0 / 3.0).abs() < 1e-9, "{l}");
        let g = generator(&iv, &phi, Vec2::on_line(0.0), 1.0, &params()).unwrap();
        assert!((g + 16.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_on_star_is_annihilated() {
        // flat top covers the whole disk around the center at radius 0.1
        let disk = DomainSpec::unit_disk();
        let phi = TestFunction::flat_top(p(0.0, 0.0), 1.5, 2.0);
        for alpha in [0.4, 1.0, 1.7] {
            let l = l_alpha(&disk, &phi, p(0.1, 0.05), alpha, &params()).unwrap();
            assert!(l.abs() < 1e-12, "{l}");
        }
    }

    #[test]
    fn pairing_agrees_with_one_sided_for_even_functions() {
        let iv = DomainSpec::<f64>::interval(-1.0, 1.0).unwrap();
        let phi = TestFunction::interval_bump(0.0, 1.0);
        let unpaired = OperatorParams {
            pv_pairing: false,
            ..params()
        };
        for alpha in [0.5, 1.0, 1.5] {
            let a = l_alpha(&iv, &phi, Vec2::on_line(0.0), alpha, &params()).unwrap();
            let b = l_alpha(&iv, &phi, Vec2::on_line(0.0), alpha, &unpaired).unwrap();
            assert!((a - b).abs() < 1e-9 * a.abs(), "alpha={alpha}: {a} vs {b}");
        }
        // off-center with α < 1 the one-sided form converges as well
        let x = Vec2::on_line(0.3);
        let a = l_alpha(&iv, &phi, x, 0.6, &params()).unwrap();
        let b = l_alpha(&iv, &phi, x, 0.6, &unpaired).unwrap();
        assert!((a - b).abs() < 1e-8 * a.abs(), "{a} vs {b}");
        assert_eq!(
            l_alpha(&iv, &phi, x, 1.2, &unpaired),
            Err(OperatorError::UnpairedDivergence)
        );
    }

    #[test]
    fn complement_identity_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prm = params().with_n_dir(128);
        for domain in [DomainSpec::unit_disk(), DomainSpec::l_shape()] {
            let phi = match domain.kind() {
                crate::geometry::DomainKind::Disk { .. } => TestFunction::disk_bump(p(0.0, 0.0), 1.0),
                _ => TestFunction::compact_bump(p(0.5, 0.5), 0.4),
            };
            for _ in 0..10 {
                let x = domain.sample_uniform(&mut rng);
                let alpha = rng.random_range(0.2..1.9);
                let g = generator(&domain, &phi, x, alpha, &prm).unwrap();
                let c = complement_form(&domain, &phi, x, alpha, &prm).unwrap();
                assert!((g - c).abs() <= 1e-6 * g.abs().max(1e-12), "{g} vs {c}");
                let h = h_alpha(&domain, x, alpha, &prm).unwrap();
                let m = complement_kernel_mass(&domain, x, alpha, &prm).unwrap();
                assert!(((h - m) / h).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn restricted_equals_generator_on_convex() {
        let disk = DomainSpec::unit_disk();
        let phi = TestFunction::disk_bump(p(0.0, 0.0), 1.0);
        let prm = params().with_n_dir(64);
        let x = p(0.2, -0.4);
        let g = generator(&disk, &phi, x, 1.3, &prm).unwrap();
        let r = restricted_form(&disk, &phi, x, 1.3, &prm).unwrap();
        assert!((g - r).abs() < 1e-9 * g.abs());
        assert_eq!(
            restricted_form(&disk, &TestFunction::zero(), x, 1.3, &prm).unwrap(),
            0.0
        );
    }

    #[test]
    fn hidden_bump_on_l_shape() {
        let l = DomainSpec::l_shape();
        let phi = TestFunction::compact_bump(p(0.5, 1.8), 0.15);
        let x = p(1.8, 0.5);
        let prm = params();
        let g = generator(&l, &phi, x, 1.0, &prm).unwrap();
        let r = restricted_form(&l, &phi, x, 1.0, &prm).unwrap();
        assert!(g.abs() < 1e-14);
        assert!(r > 0.0);
        assert!((r - g).abs() / r.abs().max(g.abs()) > 0.05);
    }

    #[test]
    fn invalid_params_rejected() {
        let disk = DomainSpec::unit_disk();
        let bad = params().with_n_dir(10);
        assert!(matches!(
            h_alpha(&disk, p(0.0, 0.0), 1.0, &bad),
            Err(OperatorError::Params(_))
        ));
        assert!(matches!(
            h_alpha(&disk, p(0.0, 0.0), 2.0, &params()),
            Err(OperatorError::Alpha(_))
        ));
    }
}
