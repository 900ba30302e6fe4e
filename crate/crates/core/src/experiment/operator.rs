//! Pointwise operator experiments: the two forms of the generator, the
//! convexity comparison, h_α checks and the adjoint-kinetic limits.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{rel_diff, DomainConfig, ExperimentError, Metric, Report, RunConfig, Table};
use crate::equilibrium::Equilibrium;
use crate::geometry::{DomainKind, DomainSpec, Vec2};
use crate::nonlocal_op::{
    complement_form, complement_kernel_mass, generator, h_alpha, h_alpha_by_quadrature, lemma2_norms, lemma3_lhs,
    lemma3_reference, radial_kernel_integral, restricted_form, OperatorParams, Prefactor,
};
use crate::scalar::gamma;
use crate::stats::fit_order;
use crate::test_function::{Poly2, TestFunction};

const DEFAULT_ALPHAS: [f64; 3] = [0.5, 1.0, 1.5];
const LEMMA2_EPS: [f64; 3] = [0.5, 0.1, 0.02];

fn params(config: &RunConfig) -> OperatorParams<f64> {
    OperatorParams::default().with_n_dir(config.n_dir.unwrap_or(512))
}

/// The bump matched to an interval or disk, vanishing quadratically on ∂Ω.
pub(crate) fn matched_bump(domain: &DomainSpec<f64>) -> Option<TestFunction<f64>> {
    match domain.kind() {
        DomainKind::Interval { a, b } => Some(TestFunction::interval_bump(0.5 * (a + b), 0.5 * (b - a))),
        DomainKind::Disk { center, radius } => Some(TestFunction::disk_bump(*center, *radius)),
        DomainKind::Polygon { .. } => None,
    }
}

/// Interior point farthest from the boundary on a 64-cell scan of the box.
fn deepest_point(domain: &DomainSpec<f64>) -> (Vec2<f64>, f64) {
    let (lo, hi) = domain.bounding_box();
    let n = 64;
    let mut best = (lo, f64::NEG_INFINITY);
    for j in 0..n {
        for i in 0..n {
            let x = Vec2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
            );
            if let Ok(d) = domain.boundary_distance(x) {
                if d > best.1 {
                    best = (x, d);
                }
            }
        }
    }
    best
}

/// A generic smooth test function: the matched bump times a polynomial on
/// intervals and disks, a compact bump around the deepest point otherwise.
fn generic_phi(domain: &DomainSpec<f64>) -> TestFunction<f64> {
    match matched_bump(domain) {
        Some(b) if domain.dim() == 1 => b.with_poly(Poly2::new(vec![(0, 0, 1.0), (1, 0, 0.5)])),
        Some(b) => b.with_poly(Poly2::new(vec![(0, 0, 1.0), (1, 0, 0.5), (1, 1, -0.3)])),
        None => {
            let (c, d) = deepest_point(domain);
            TestFunction::compact_bump(c, 0.9 * d)
        }
    }
}

fn random_points(domain: &DomainSpec<f64>, n: usize, seed: u64, stream: u64) -> Vec<Vec2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(|_| domain.sample_uniform(&mut rng)).collect()
}

fn build_all(
    config: &RunConfig,
    base: &Path,
    default: impl FnOnce() -> Vec<DomainConfig>,
) -> Result<Vec<(String, DomainSpec<f64>)>, ExperimentError> {
    config
        .domains_or(default)
        .iter()
        .map(|d| Ok((d.label(), d.build(base)?)))
        .collect()
}

pub(super) fn identity(config: &RunConfig, base: &Path, report: &mut Report) -> Result<(), ExperimentError> {
    let domains = build_all(config, base, || vec![DomainConfig::unit_disk(), DomainConfig::LShape])?;
    let alphas = config.alphas_or(&DEFAULT_ALPHAS);
    let n = config.points.unwrap_or(100);
    let prm = params(config);
    let mut table = Table::new(
        "identity",
        &["domain", "alpha", "x", "y", "generator", "complement_form", "rel_err"],
    );
    let mut worst: f64 = 0.0;
    for (k, (label, domain)) in domains.iter().enumerate() {
        let phi = generic_phi(domain);
        let pts = random_points(domain, n, config.seed(), k as u64);
        for &alpha in &alphas {
            let rows = pts
                .par_iter()
                .map(|&x| {
                    let g = generator(domain, &phi, x, alpha, &prm)?;
                    let c = complement_form(domain, &phi, x, alpha, &prm)?;
                    Ok((x, g, c))
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            let mut local: f64 = 0.0;
            for (x, g, c) in rows {
                let e = rel_diff(g, c);
                local = local.max(e);
                table.push(vec![
                    label.clone().into(),
                    alpha.into(),
                    x.x.into(),
                    x.y.into(),
                    g.into(),
                    c.into(),
                    e.into(),
                ]);
            }
            report.metrics.push(Metric::at_most(
                format!("max_rel_err/{label}/alpha={alpha}"),
                local,
                1e-6,
            ));
            worst = worst.max(local);
        }
    }
    report.metrics.push(Metric::at_most("max_rel_err", worst, 1e-6));
    report.tables.push(table);
    report.detail("n_dir", prm.n_dir);
    Ok(())
}

pub(super) fn convexity(config: &RunConfig, base: &Path, report: &mut Report) -> Result<(), ExperimentError> {
    let domains = build_all(config, base, || vec![DomainConfig::unit_disk()])?;
    let alphas = config.alphas_or(&DEFAULT_ALPHAS);
    let n = config.points.unwrap_or(20);
    let prm = params(config);
    let theorem = OperatorParams {
        prefactor: Prefactor::Theorem,
        ..prm
    };
    let mut table = Table::new(
        "convexity",
        &["domain", "alpha", "x", "y", "generator", "restricted_form", "rel_diff"],
    );
    let mut worst: f64 = 0.0;
    for (k, (label, domain)) in domains.iter().enumerate() {
        if !domain.is_convex() {
            return Err(ExperimentError::Config(format!(
                "convex-vs-nonconvex compares on convex domains; {label} is not convex"
            )));
        }
        let phi = generic_phi(domain);
        let pts = random_points(domain, n, config.seed(), k as u64);
        for &alpha in &alphas {
            let rows = pts
                .par_iter()
                .map(|&x| {
                    let g = generator(domain, &phi, x, alpha, &prm)?;
                    let r = restricted_form(domain, &phi, x, alpha, &theorem)?;
                    Ok((x, g, r))
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            for (x, g, r) in rows {
                let e = rel_diff(g, r);
                worst = worst.max(e);
                table.push(vec![
                    label.clone().into(),
                    alpha.into(),
                    x.x.into(),
                    x.y.into(),
                    g.into(),
                    r.into(),
                    e.into(),
                ]);
            }
        }
    }
    report.metrics.push(Metric::at_most("convex_max_rel_diff", worst, 1e-6));

    // x sees nothing of the bump: the segment to its center crosses the notch
    let l = DomainSpec::l_shape();
    let x = Vec2::new(1.8, 0.5);
    let phi = TestFunction::compact_bump(Vec2::new(0.5, 1.8), 0.15);
    let mut least = f64::INFINITY;
    for &alpha in &alphas {
        let g = generator(&l, &phi, x, alpha, &prm)?;
        let r = restricted_form(&l, &phi, x, alpha, &theorem)?;
        let e = rel_diff(g, r);
        least = least.min(e);
        table.push(vec![
            "l_shape_hidden_bump".into(),
            alpha.into(),
            x.x.into(),
            x.y.into(),
            g.into(),
            r.into(),
            e.into(),
        ]);
    }
    report
        .metrics
        .push(Metric::at_least("nonconvex_min_rel_diff", least, 0.05));
    report.tables.push(table);
    Ok(())
}

/// Start point at distance δ from a boundary point, moving inward.
fn approach(domain: &DomainSpec<f64>) -> (Vec2<f64>, Vec2<f64>) {
    match domain.kind() {
        DomainKind::Interval { b, .. } => (Vec2::on_line(*b), Vec2::on_line(-1.0)),
        DomainKind::Disk { center, radius } => (*center + Vec2::new(*radius, 0.0), Vec2::new(-1.0, 0.0)),
        DomainKind::Polygon { vertices } => {
            // midpoint of the first edge; counterclockwise order puts the interior on the left
            let (p, q) = (vertices[0], vertices[1]);
            let t = (q - p) * (1.0 / (q - p).norm());
            ((p + q) * 0.5, Vec2::new(-t.y, t.x))
        }
    }
}

pub(super) fn h_alpha_bound(config: &RunConfig, base: &Path, report: &mut Report) -> Result<(), ExperimentError> {
    let alphas = config.alphas_or(&DEFAULT_ALPHAS);
    let prm = params(config);

    // closed forms at the center
    let iv = DomainSpec::interval(-1.0, 1.0)?;
    let h1 = h_alpha(&iv, Vec2::on_line(0.0), 1.0, &prm)?;
    report
        .metrics
        .push(Metric::at_most("interval_center_rel_err", rel_diff(h1, 2.0), 1e-10));
    let mut disk_err: f64 = 0.0;
    for &alpha in &alphas {
        let h = h_alpha(&DomainSpec::unit_disk(), Vec2::zero(), alpha, &prm)?;
        disk_err = disk_err.max(rel_diff(h, std::f64::consts::TAU * gamma(alpha)));
    }
    report
        .metrics
        .push(Metric::at_most("disk_center_rel_err", disk_err, 1e-10));

    // the radial identity ∫η^{-1-α}e^{-d/η}dη = Γ(α)d^{-α}
    let mut radial: f64 = 0.0;
    for &alpha in &alphas {
        for d in [0.01, 0.3, 1.0, 7.0] {
            radial = radial.max(rel_diff(
                radial_kernel_integral(d, alpha),
                gamma(alpha) * d.powf(-alpha),
            ));
        }
    }
    report
        .metrics
        .push(Metric::at_most("radial_identity_rel_err", radial, 1e-8));

    let domains = build_all(config, base, || {
        vec![
            DomainConfig::unit_interval(),
            DomainConfig::unit_disk(),
            DomainConfig::LShape,
        ]
    })?;
    let n = config.points.unwrap_or(50);
    let mut points = Table::new(
        "h_alpha_points",
        &[
            "domain",
            "alpha",
            "x",
            "y",
            "h_alpha",
            "h_alpha_quadrature",
            "complement_mass",
        ],
    );
    let mut profile = Table::new(
        "h_alpha_profile",
        &["domain", "alpha", "delta", "h_alpha", "h_delta_alpha"],
    );
    let (mut red, mut comp): (f64, f64) = (0.0, 0.0);
    for (k, (label, domain)) in domains.iter().enumerate() {
        let pts = random_points(domain, n, config.seed(), k as u64);
        for &alpha in &alphas {
            let rows = pts
                .par_iter()
                .map(|&x| {
                    Ok((
                        x,
                        h_alpha(domain, x, alpha, &prm)?,
                        h_alpha_by_quadrature(domain, x, alpha, &prm)?,
                        complement_kernel_mass(domain, x, alpha, &prm)?,
                    ))
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            for (x, h, q, c) in rows {
                red = red.max(rel_diff(h, q));
                comp = comp.max(rel_diff(h, c));
                points.push(vec![
                    label.clone().into(),
                    alpha.into(),
                    x.x.into(),
                    x.y.into(),
                    h.into(),
                    q.into(),
                    c.into(),
                ]);
            }

            // h_α δ^α along a normal toward the boundary
            let (p, inward) = approach(domain);
            let (mut ds, mut hs) = (Vec::new(), Vec::new());
            let mut sup: f64 = 0.0;
            for j in 1..=12 {
                let x = p + inward * 0.5f64.powi(j);
                let delta = domain.boundary_distance(x)?;
                let h = h_alpha(domain, x, alpha, &prm)?;
                sup = sup.max(h * delta.powf(alpha));
                profile.push(vec![
                    label.clone().into(),
                    alpha.into(),
                    delta.into(),
                    h.into(),
                    (h * delta.powf(alpha)).into(),
                ]);
                if j >= 6 {
                    ds.push(delta);
                    hs.push(h);
                }
            }
            let slope = fit_order(&ds, &hs);
            report
                .metrics
                .push(Metric::info(format!("sup_h_delta_alpha/{label}/alpha={alpha}"), sup));
            report
                .metrics
                .push(Metric::info(format!("blowup_slope/{label}/alpha={alpha}"), slope));
            report.metrics.push(Metric::at_most(
                format!("blowup_slope_dev/{label}/alpha={alpha}"),
                (slope + alpha).abs(),
                0.05,
            ));
        }
    }
    report.metrics.push(Metric::at_most("reduction_max_rel_err", red, 1e-4));
    report
        .metrics
        .push(Metric::at_most("complement_identity_max_rel_err", comp, 1e-5));
    report.tables.push(points);
    report.tables.push(profile);
    Ok(())
}

/// Evaluation point for the ε-sweep: off center so no symmetry hides errors.
fn probe_point(domain: &DomainSpec<f64>) -> Vec2<f64> {
    match domain.kind() {
        DomainKind::Interval { a, b } => Vec2::on_line(0.5 * (a + b) + 0.15 * (b - a)),
        DomainKind::Disk { center, radius } => *center + Vec2::new(0.3, 0.2) * *radius,
        DomainKind::Polygon { .. } => deepest_point(domain).0,
    }
}

fn lemma2_functions(domain: &DomainSpec<f64>) -> Vec<(&'static str, TestFunction<f64>)> {
    let (c, r) = match domain.kind() {
        DomainKind::Interval { a, b } => (Vec2::on_line(0.5 * (a + b)), 0.5 * (b - a)),
        DomainKind::Disk { center, radius } => (*center, *radius),
        DomainKind::Polygon { .. } => deepest_point(domain),
    };
    let off = if domain.dim() == 1 {
        Vec2::on_line(0.1 * r)
    } else {
        Vec2::new(0.1, -0.1) * r
    };
    let mut out = Vec::new();
    if let Some(b) = matched_bump(domain) {
        out.push(("matched_bump", b));
    }
    out.push(("compact_bump", TestFunction::compact_bump(c + off, 0.7 * r)));
    out
}

pub(super) fn lemma3(config: &RunConfig, base: &Path, report: &mut Report) -> Result<(), ExperimentError> {
    let domains = build_all(config, base, || {
        vec![DomainConfig::unit_interval(), DomainConfig::unit_disk()]
    })?;
    let alphas = config.alphas_or(&DEFAULT_ALPHAS);
    let eps = config
        .eps
        .clone()
        .unwrap_or_else(|| (3..=9).map(|k| 0.5f64.powi(k)).collect());
    let prm = params(config);
    let mut sweep = Table::new(
        "lemma3",
        &[
            "domain",
            "alpha",
            "eps",
            "lhs",
            "reference",
            "error",
            "error_over_eps_log",
        ],
    );
    let mut norms = Table::new(
        "lemma2",
        &["domain", "alpha", "function", "eps", "chi_norm", "phi_norm", "ratio"],
    );
    let mut worst_ratio: f64 = 0.0;
    for (label, domain) in &domains {
        let phi = matched_bump(domain).ok_or_else(|| {
            ExperimentError::Config(format!("lemma3-convergence needs an interval or a disk, got {label}"))
        })?;
        let x = probe_point(domain);
        for &alpha in &alphas {
            let eq =
                Equilibrium::normalized(alpha, domain.dim()).map_err(|e| ExperimentError::Config(e.to_string()))?;
            let reference = lemma3_reference(domain, &phi, x, &eq, &prm)?;
            let mut errors = Vec::with_capacity(eps.len());
            let mut cs = Vec::with_capacity(eps.len());
            for &e in &eps {
                let lhs = lemma3_lhs(domain, &phi, x, e, &eq, &prm)?.value;
                let err = (lhs - reference).abs();
                let c = err / (e * (1.0 / e).ln());
                errors.push(err);
                cs.push(c);
                sweep.push(vec![
                    label.clone().into(),
                    alpha.into(),
                    e.into(),
                    lhs.into(),
                    reference.into(),
                    err.into(),
                    c.into(),
                ]);
            }
            let order = fit_order(&eps, &errors);
            report
                .metrics
                .push(Metric::info(format!("order/{label}/alpha={alpha}"), order));
            if (alpha - 1.0).abs() < 1e-12 {
                // errors must shrink with ε, and the constant of the ε·log(1/ε) bound
                // must not grow as ε is refined
                let mut pairs: Vec<(f64, f64, f64)> = eps
                    .iter()
                    .zip(&errors)
                    .zip(&cs)
                    .map(|((&e, &r), &c)| (e, r, c))
                    .collect();
                pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
                let increases = pairs.windows(2).filter(|w| w[1].1 >= w[0].1).count();
                let growth = pairs.windows(2).map(|w| w[1].2 / w[0].2).fold(0.0, f64::max);
                let c_max = cs.iter().copied().fold(0.0, f64::max);
                report.metrics.push(Metric::at_most(
                    format!("error_increases/{label}/alpha=1"),
                    increases as f64,
                    0.0,
                ));
                report.metrics.push(Metric::at_most(
                    format!("log_constant_growth/{label}/alpha=1"),
                    growth,
                    1.1,
                ));
                report
                    .metrics
                    .push(Metric::info(format!("log_constant_max/{label}/alpha=1"), c_max));
            } else {
                report.metrics.push(Metric::at_most(
                    format!("order_dev/{label}/alpha={alpha}"),
                    (order - (2.0 - alpha)).abs(),
                    0.3,
                ));
            }

            let resolution = config
                .quadrature_resolution
                .unwrap_or(if domain.dim() == 1 { 8 } else { 4 });
            for (name, f) in lemma2_functions(domain) {
                for e in LEMMA2_EPS {
                    let nrm = lemma2_norms(domain, &f, e, &eq, resolution)?;
                    let ratio = nrm.chi / nrm.phi;
                    worst_ratio = worst_ratio.max(ratio);
                    norms.push(vec![
                        label.clone().into(),
                        alpha.into(),
                        name.into(),
                        e.into(),
                        nrm.chi.into(),
                        nrm.phi.into(),
                        ratio.into(),
                    ]);
                }
            }
        }
    }
    report
        .metrics
        .push(Metric::at_most("lemma2_max_norm_ratio", worst_ratio, 1.0));
    report.tables.push(sweep);
    report.tables.push(norms);
    Ok(())
}
