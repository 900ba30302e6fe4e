//! Test functions φ(x)·ψ(t) with analytic gradient and Hessian.
//!
//! Radial profiles are written in s = |x − c|², so the derivatives are regular
//! at the center: ∇φ = 2F'(s)(x − c), ∇²φ = 2F'(s)·I + 4F''(s)(x − c)(x − c)ᵀ.
//! On an interval the same formulas are used with y ≡ 0.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::scalar::{lit, Scalar};

/// Value, gradient and Hessian at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub value: T,
    pub grad: Vec2<T>,
    pub hess: [[T; 2]; 2],
}

impl<T: Scalar> Jet<T> {
    fn constant(value: T) -> Self {
        Self {
            value,
            grad: Vec2::zero(),
            hess: [[T::zero(); 2]; 2],
        }
    }

    fn scale(self, s: T) -> Self {
        let h = self.hess;
        Self {
            value: self.value * s,
            grad: self.grad * s,
            hess: [[h[0][0] * s, h[0][1] * s], [h[1][0] * s, h[1][1] * s]],
        }
    }

    fn product(self, o: Self) -> Self {
        let (f, g) = (self, o);
        let mut hess = [[T::zero(); 2]; 2];
        let fg = [f.grad.x, f.grad.y];
        let gg = [g.grad.x, g.grad.y];
        for i in 0..2 {
            for j in 0..2 {
                hess[i][j] = f.hess[i][j] * g.value + g.hess[i][j] * f.value + fg[i] * gg[j] + fg[j] * gg[i];
            }
        }
        Self {
            value: f.value * g.value,
            grad: f.grad * g.value + g.grad * f.value,
            hess,
        }
    }
}

/// Compactly supported spatial profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Bump<T> {
    /// (1 − |x−c|²/R²)²₊, vanishing quadratically on the circle |x−c| = R.
    Disk { center: Vec2<T>, radius: T },
    /// (1 − ((x−m)/h)²)²₊ on the line.
    Interval { mid: T, half_width: T },
    /// exp(1 − 1/(1 − |x−c|²/r²)) inside B(c, r), zero outside.
    Compact { center: Vec2<T>, radius: T },
    /// 1 on B(c, inner), smooth C^∞ transition to 0 at |x−c| = outer.
    FlatTop { center: Vec2<T>, inner: T, outer: T },
    /// φ ≡ 1 (not in D_Ω; used for closed-form checks of χ_ε).
    One,
}

/// Polynomial Σ c_ij x^i y^j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly2<T> {
    pub terms: Vec<(u32, u32, T)>,
}

impl<T: Scalar> Poly2<T> {
    pub fn new(terms: Vec<(u32, u32, T)>) -> Self {
        Self { terms }
    }

    fn jet(&self, p: Vec2<T>) -> Jet<T> {
        let pw = |b: T, e: u32| if e == 0 { T::one() } else { b.powi(e as i32) };
        let mut j = Jet::constant(T::zero());
        for &(i, k, c) in &self.terms {
            let (fi, fk) = (lit::<T>(i as f64), lit::<T>(k as f64));
            let xi = pw(p.x, i);
            let yk = pw(p.y, k);
            let dxi = if i >= 1 { fi * pw(p.x, i - 1) } else { T::zero() };
            let dyk = if k >= 1 { fk * pw(p.y, k - 1) } else { T::zero() };
            let ddxi = if i >= 2 {
                fi * (fi - T::one()) * pw(p.x, i - 2)
            } else {
                T::zero()
            };
            let ddyk = if k >= 2 {
                fk * (fk - T::one()) * pw(p.y, k - 2)
            } else {
                T::zero()
            };
            j.value += c * xi * yk;
            j.grad += Vec2::new(c * dxi * yk, c * xi * dyk);
            j.hess[0][0] += c * ddxi * yk;
            j.hess[1][1] += c * xi * ddyk;
            j.hess[0][1] += c * dxi * dyk;
            j.hess[1][0] += c * dxi * dyk;
        }
        j
    }

    fn value(&self, p: Vec2<T>) -> T {
        self.terms.iter().fold(T::zero(), |acc, &(i, k, c)| {
            acc + c * p.x.powi(i as i32) * p.y.powi(k as i32)
        })
    }
}

/// Time factor ψ(t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TimeProfile<T> {
    #[default]
    Constant,
    /// cos²(πt / 2T) on [0, T], zero afterwards; ψ(T) = ψ'(T) = 0.
    CosineRamp { horizon: T },
}

impl<T: Scalar> TimeProfile<T> {
    pub fn value(&self, t: T) -> T {
        match *self {
            TimeProfile::Constant => T::one(),
            TimeProfile::CosineRamp { horizon } => {
                if t >= horizon {
                    T::zero()
                } else {
                    let c = (T::FRAC_PI_2() * t / horizon).cos();
                    c * c
                }
            }
        }
    }

    /// ∫_a^b ψ(t) dt, exact.
    pub fn integral(&self, a: T, b: T) -> T {
        match *self {
            TimeProfile::Constant => b - a,
            TimeProfile::CosineRamp { horizon } => {
                // cos²(πt/2T) = (1 + cos(πt/T)) / 2
                let prim = |t: T| {
                    let t = t.min(horizon);
                    lit::<T>(0.5) * (t + horizon / T::PI() * (T::PI() * t / horizon).sin())
                };
                prim(b) - prim(a)
            }
        }
    }

    pub fn derivative(&self, t: T) -> T {
        match *self {
            TimeProfile::Constant => T::zero(),
            TimeProfile::CosineRamp { horizon } => {
                if t >= horizon {
                    T::zero()
                } else {
                    -(T::FRAC_PI_2() / horizon) * (T::PI() * t / horizon).sin()
                }
            }
        }
    }
}

/// φ(x, t) = scale · bump(x) · poly(x) · ψ(t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction<T> {
    pub bump: Bump<T>,
    #[serde(default)]
    pub poly: Option<Poly2<T>>,
    pub scale: T,
    #[serde(default)]
    pub time: TimeProfile<T>,
}

impl<T: Scalar> TestFunction<T> {
    pub fn new(bump: Bump<T>) -> Self {
        Self {
            bump,
            poly: None,
            scale: T::one(),
            time: TimeProfile::Constant,
        }
    }

    /// (1 − |x−c|²/R²)²₊ matched to a disk domain.
    pub fn disk_bump(center: Vec2<T>, radius: T) -> Self {
        Self::new(Bump::Disk { center, radius })
    }

    pub fn interval_bump(mid: T, half_width: T) -> Self {
        Self::new(Bump::Interval { mid, half_width })
    }

    pub fn compact_bump(center: Vec2<T>, radius: T) -> Self {
        Self::new(Bump::Compact { center, radius })
    }

    pub fn flat_top(center: Vec2<T>, inner: T, outer: T) -> Self {
        assert!(inner > T::zero() && outer > inner);
        Self::new(Bump::FlatTop { center, inner, outer })
    }

    pub fn one() -> Self {
        Self::new(Bump::One)
    }

    pub fn zero() -> Self {
        Self::one().scaled(T::zero())
    }

    pub fn scaled(mut self, s: T) -> Self {
        self.scale *= s;
        self
    }

    pub fn with_poly(mut self, poly: Poly2<T>) -> Self {
        self.poly = Some(poly);
        self
    }

    pub fn with_time(mut self, time: TimeProfile<T>) -> Self {
        self.time = time;
        self
    }

    /// Spatial value φ(x) (time factor excluded).
    pub fn value(&self, p: Vec2<T>) -> T {
        let b = bump_value(&self.bump, p);
        if b == T::zero() {
            return T::zero();
        }
        let poly = self.poly.as_ref().map_or(T::one(), |q| q.value(p));
        self.scale * b * poly
    }

    /// Full space-time value φ(x)·ψ(t).
    pub fn value_at(&self, p: Vec2<T>, t: T) -> T {
        self.value(p) * self.time.value(t)
    }

    pub fn jet(&self, p: Vec2<T>) -> Jet<T> {
        let b = bump_jet(&self.bump, p);
        let j = match &self.poly {
            Some(q) => b.product(q.jet(p)),
            None => b,
        };
        j.scale(self.scale)
    }

    pub fn gradient(&self, p: Vec2<T>) -> Vec2<T> {
        self.jet(p).grad
    }

    pub fn hessian(&self, p: Vec2<T>) -> [[T; 2]; 2] {
        self.jet(p).hess
    }
}

fn quad_profile<T: Scalar>(s: T, r2: T) -> (T, T, T) {
    // F(s) = (1 − s/r²)²
    if s >= r2 {
        return (T::zero(), T::zero(), T::zero());
    }
    let q = T::one() - s / r2;
    let two = lit::<T>(2.0);
    (q * q, -two * q / r2, two / (r2 * r2))
}

fn exp_profile<T: Scalar>(s: T, r2: T) -> (T, T, T) {
    // F(s) = exp(1 − 1/q), q = 1 − s/r²
    if s >= r2 {
        return (T::zero(), T::zero(), T::zero());
    }
    let q = T::one() - s / r2;
    let f = (T::one() - T::one() / q).exp();
    let d1 = -f / (r2 * q * q);
    let d2 = -d1 / (r2 * q * q) - lit::<T>(2.0) * f / (r2 * r2 * q * q * q);
    (f, d1, d2)
}

fn radial_jet<T: Scalar>(c: Vec2<T>, p: Vec2<T>, prof: (T, T, T)) -> Jet<T> {
    let (f, d1, d2) = prof;
    let r = p - c;
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let rr = [r.x, r.y];
    let mut hess = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            hess[i][j] = four * d2 * rr[i] * rr[j] + if i == j { two * d1 } else { T::zero() };
        }
    }
    Jet {
        value: f,
        grad: r * (two * d1),
        hess,
    }
}

fn smooth_step_parts<T: Scalar>(t: T) -> (T, T, T) {
    // g(t) = exp(−1/t) for t > 0 with first and second derivatives
    if t <= T::zero() {
        return (T::zero(), T::zero(), T::zero());
    }
    let g = (-T::one() / t).exp();
    let t2 = t * t;
    (g, g / t2, g * (T::one() / (t2 * t2) - lit::<T>(2.0) / (t2 * t)))
}

fn flat_top_profile<T: Scalar>(rho: T, inner: T, outer: T) -> (T, T, T) {
    // f(ρ) with f = 1 for ρ ≤ inner, 0 for ρ ≥ outer; returns (f, f_ρ, f_ρρ)
    if rho <= inner {
        return (T::one(), T::zero(), T::zero());
    }
    if rho >= outer {
        return (T::zero(), T::zero(), T::zero());
    }
    let w = outer - inner;
    let u = (rho - inner) / w;
    let (a, a1, a2) = smooth_step_parts(T::one() - u);
    let (b, b1, b2) = smooth_step_parts(u);
    // A(u) = g(1−u): A' = −g'(1−u), A'' = g''(1−u)
    let (da, dda) = (-a1, a2);
    let s = a + b;
    let n = da * b - a * b1;
    let dn = dda * b - a * b2;
    let ds = da + b1;
    let f = a / s;
    let f1 = n / (s * s);
    let f2 = dn / (s * s) - lit::<T>(2.0) * n * ds / (s * s * s);
    (f, f1 / w, f2 / (w * w))
}

fn bump_value<T: Scalar>(b: &Bump<T>, p: Vec2<T>) -> T {
    match *b {
        Bump::Disk { center, radius } => quad_profile((p - center).norm_sq(), radius * radius).0,
        Bump::Interval { mid, half_width } => {
            let d = p.x - mid;
            quad_profile(d * d, half_width * half_width).0
        }
        Bump::Compact { center, radius } => exp_profile((p - center).norm_sq(), radius * radius).0,
        Bump::FlatTop { center, inner, outer } => flat_top_profile((p - center).norm(), inner, outer).0,
        Bump::One => T::one(),
    }
}

fn bump_jet<T: Scalar>(b: &Bump<T>, p: Vec2<T>) -> Jet<T> {
    match *b {
        Bump::Disk { center, radius } => radial_jet(center, p, quad_profile((p - center).norm_sq(), radius * radius)),
        Bump::Interval { mid, half_width } => {
            let c = Vec2::new(mid, p.y);
            let d = p.x - mid;
            let mut j = radial_jet(c, p, quad_profile(d * d, half_width * half_width));
            j.hess[1][1] = T::zero();
            j
        }
        Bump::Compact { center, radius } => radial_jet(center, p, exp_profile((p - center).norm_sq(), radius * radius)),
        Bump::FlatTop { center, inner, outer } => {
            let r = p - center;
            let rho = r.norm();
            let (f, f1, f2) = flat_top_profile(rho, inner, outer);
            if f1 == T::zero() && f2 == T::zero() {
                return Jet::constant(f);
            }
            let e = r * (T::one() / rho);
            let ee = [e.x, e.y];
            let mut hess = [[T::zero(); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let id = if i == j { T::one() } else { T::zero() };
                    hess[i][j] = f2 * ee[i] * ee[j] + f1 / rho * (id - ee[i] * ee[j]);
                }
            }
            Jet {
                value: f,
                grad: e * f1,
                hess,
            }
        }
        Bump::One => Jet::constant(T::one()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_check(phi: &TestFunction<f64>, p: Vec2<f64>, dim: usize) {
        let h = 1e-5;
        let j = phi.jet(p);
        let axes = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let scale = 1.0 + j.value.abs() + j.grad.norm();
        for (i, &e) in axes.iter().enumerate().take(dim) {
            let gp = phi.value(p + e * h);
            let gm = phi.value(p - e * h);
            let g_fd = (gp - gm) / (2.0 * h);
            let g = if i == 0 { j.grad.x } else { j.grad.y };
            assert!((g - g_fd).abs() <= 1e-6 * scale, "grad {i}: {g} vs {g_fd} at {p:?}");
            let hp = phi.gradient(p + e * h);
            let hm = phi.gradient(p - e * h);
            for k in 0..dim {
                let col = if k == 0 {
                    (hp.x - hm.x) / (2.0 * h)
                } else {
                    (hp.y - hm.y) / (2.0 * h)
                };
                let hs = 1.0 + j.hess[i][k].abs();
                assert!(
                    (j.hess[k][i] - col).abs() <= 1e-6 * hs.max(scale),
                    "hess {k}{i} at {p:?}: {} vs {col}",
                    j.hess[k][i]
                );
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = Vec2::new(0.1, -0.2);
        let funcs = vec![
            (TestFunction::disk_bump(Vec2::zero(), 1.0), 2),
            (TestFunction::interval_bump(0.0, 1.0), 1),
            (TestFunction::compact_bump(c, 0.6), 2),
            (TestFunction::flat_top(c, 0.2, 0.7), 2),
            (
                TestFunction::compact_bump(c, 0.6).with_poly(Poly2::new(vec![
                    (0, 0, 1.0),
                    (1, 0, 0.5),
                    (1, 1, -2.0),
                    (0, 2, 0.3),
                ])),
                2,
            ),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (phi, dim) in &funcs {
            for _ in 0..200 {
                let p = if *dim == 1 {
                    Vec2::on_line(rng.random::<f64>() * 1.8 - 0.9)
                } else {
                    let r: f64 = rng.random::<f64>() * 0.9;
                    let th: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                    Vec2::new(r * th.cos(), r * th.sin())
                };
                fd_check(phi, p, *dim);
            }
        }
    }

    #[test]
    fn boundary_vanishing_orders() {
        // δ^{-2} φ bounded for the disk bump on the unit disk
        let phi = TestFunction::disk_bump(Vec2::zero(), 1.0f64);
        for k in 1..12 {
            let delta = 2f64.powi(-k);
            let v = phi.value(Vec2::new(1.0 - delta, 0.0));
            assert!(v / (delta * delta) <= 4.0 + 1e-9);
        }
        let b = TestFunction::compact_bump(Vec2::zero(), 0.5f64);
        assert_eq!(b.value(Vec2::new(0.5, 0.0)), 0.0);
        assert!((b.value(Vec2::zero()) - 1.0).abs() < 1e-15);
        let f = TestFunction::flat_top(Vec2::zero(), 0.3f64, 0.6);
        assert_eq!(f.value(Vec2::new(0.29, 0.0)), 1.0);
        assert_eq!(f.value(Vec2::new(0.61, 0.0)), 0.0);
    }

    #[test]
    fn time_profile() {
        let p = TimeProfile::CosineRamp { horizon: 2.0f64 };
        assert_eq!(p.value(0.0), 1.0);
        assert!(p.value(2.0).abs() < 1e-15);
        let h = 1e-6;
        for t in [0.3, 1.0, 1.7] {
            let fd = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
            assert!((fd - p.derivative(t)).abs() < 1e-8);
        }
    }
}
