//! Particle experiments: kinetic ε-sweep, the jump process against the grid
//! solver, and the samplers' statistics.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::solver::{
    assemble_for, checked_evolve, density_table, grid_for, initial_field, oracle_equivalence, oracle_table,
    push_density, refinement, refinement_table, RunTag,
};
use super::{central_uniform, DomainConfig, ExperimentError, Metric, Report, RunConfig, Table};
use crate::equilibrium::Equilibrium;
use crate::geometry::{DomainKind, Vec2};
use crate::jump_mc::{self, empirical_kill_hazard, event_rate, sample_jump, JumpRunConfig};
use crate::kinetic_mc::{self, KineticRunConfig};
use crate::nonlocal_op::{h_alpha, OperatorParams};
use crate::stats::ks_test;

fn equilibrium(alpha: f64, dim: usize) -> Result<Equilibrium<f64>, ExperimentError> {
    Equilibrium::normalized(alpha, dim).map_err(|e| ExperimentError::Config(e.to_string()))
}

/// Snapshot times T/4, T/2, 3T/4, T.
fn snapshots(t_final: f64) -> Vec<f64> {
    (1..=4).map(|k| t_final * k as f64 / 4.0).collect()
}

fn survival_increases(s: &[f64]) -> usize {
    s.windows(2).filter(|w| w[1] > w[0]).count()
}

pub(super) fn kinetic_sweep(config: &RunConfig, base: &Path, report: &mut Report) -> Result<(), ExperimentError> {
    let domains = config.domains_or(|| vec![DomainConfig::unit_interval()]);
    let alphas = config.alphas_or(&[1.0]);
    let mut eps = config.eps.clone().unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]);
    eps.sort_by(|a, b| b.total_cmp(a));
    let n = config.particles.unwrap_or(1_000_000);
    let t_final = config.t_final.unwrap_or(0.1);
    let times = snapshots(t_final);
    let mut dens = density_table();
    let mut dist = Table::new(
        "kinetic_l1",
        &["domain", "alpha", "eps", "l1_distance", "survival", "pde_mass"],
    );
    for dc in &domains {
        let (label, domain) = (dc.label(), dc.build(base)?);
        let grid = grid_for(
            &domain,
            config.grid_cells.unwrap_or(200),
            config.grid_cells_2d.unwrap_or(64),
        );
        let init = config
            .initial_density
            .clone()
            .unwrap_or_else(|| central_uniform(&domain));
        for &alpha in &alphas {
            let eq = equilibrium(alpha, domain.dim())?;
            let tag = format!("{label}/alpha={alpha}");
            // a normalized equilibrium has tail coefficient C, which scales the limit generator
            let matrix = assemble_for(&domain, &grid, alpha, report, &tag)?.scaled(eq.tail_coefficient());
            let f0 = initial_field(&init, &grid);
            let traj = checked_evolve(&matrix, &f0, t_final, None, report, &format!("kinetic/{tag}"))?;
            let pde: Vec<_> = times.iter().map(|&t| traj.at_time(t)).collect();
            for f in &pde {
                push_density(
                    &mut dens,
                    &RunTag {
                        process: "pde",
                        domain: &label,
                        alpha,
                        parameter: 0.0,
                    },
                    f,
                );
            }
            let pde_final = pde.last().expect("four snapshots");
            let mut l1 = Vec::with_capacity(eps.len());
            for &e in &eps {
                let run = KineticRunConfig {
                    eps: e,
                    alpha,
                    t_final,
                    n_particles: n,
                    seed: config.seed(),
                    initial_density: init.clone(),
                    snapshot_times: times.clone(),
                };
                let (_, fields, survival) = kinetic_mc::run(&run, &domain, &eq, &grid)?;
                for f in &fields {
                    push_density(
                        &mut dens,
                        &RunTag {
                            process: "kinetic",
                            domain: &label,
                            alpha,
                            parameter: e,
                        },
                        f,
                    );
                }
                let d = fields.last().expect("four snapshots").l1_distance(pde_final);
                dist.push(vec![
                    label.clone().into(),
                    alpha.into(),
                    e.into(),
                    d.into(),
                    (*survival.last().unwrap()).into(),
                    pde_final.mass().into(),
                ]);
                report
                    .metrics
                    .push(Metric::info(format!("kinetic_l1/{tag}/eps={e}"), d));
                report.metrics.push(Metric::at_most(
                    format!("kinetic_survival_increases/{tag}/eps={e}"),
                    survival_increases(&survival) as f64,
                    0.0,
                ));
                l1.push(d);
            }
            let increases = l1.windows(2).filter(|w| w[1] > w[0]).count();
            report.metrics.push(Metric::at_most(
                format!("kinetic_l1_increases/{tag}"),
                increases as f64,
                0.0,
            ));
            report.metrics.push(Metric::at_most(
                format!("kinetic_l1_smallest_eps/{tag}"),
                *l1.last().unwrap(),
                0.1,
            ));
        }
    }
    report.tables.push(dist);
    report.tables.push(dens);
    Ok(())
}

pub(super) fn jump_vs_pde(config: &RunConfig, base: &Path, report: &mut Report) -> Result<(), ExperimentError> {
    let domains = config.domains_or(|| {
        vec![
            DomainConfig::unit_interval(),
            DomainConfig::unit_disk(),
            DomainConfig::LShape,
        ]
    });
    let alphas = config.alphas_or(&[1.0]);
    let solver_alphas = config.solver_alphas.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5]);
    let mut r_mins = config.r_min.clone().unwrap_or_else(|| vec![0.1, 0.01, 0.001]);
    r_mins.sort_by(|a, b| b.total_cmp(a));
    let n = config.particles.unwrap_or(1_000_000);
    let t_final = config.t_final.unwrap_or(0.1);
    let levels = config
        .refinement_levels
        .clone()
        .unwrap_or_else(|| vec![25, 50, 100, 200, 400]);
    let times = snapshots(t_final);
    let prm = OperatorParams::default();

    let mut dens = density_table();
    let mut oracle = oracle_table();
    let mut hazards = Table::new(
        "hazard",
        &["domain", "alpha", "r_min", "x", "hazard", "std_error", "h_alpha"],
    );
    let mut comparison = Table::new(
        "jump_l1",
        &[
            "domain",
            "alpha",
            "r_min",
            "snapshot_time",
            "l1_distance",
            "survival",
            "pde_mass",
        ],
    );
    let mut refine = refinement_table();

    for (k, dc) in domains.iter().enumerate() {
        let (label, domain) = (dc.label(), dc.build(base)?);
        let grid = grid_for(
            &domain,
            config.grid_cells.unwrap_or(200),
            config.grid_cells_2d.unwrap_or(64),
        );
        let init = config
            .initial_density
            .clone()
            .unwrap_or_else(|| central_uniform(&domain));
        let f0 = initial_field(&init, &grid);

        // solver structure on every domain, oracle agreement where a matched bump exists
        for &alpha in &solver_alphas {
            let tag = format!("{label}/alpha={alpha}");
            let matrix = assemble_for(&domain, &grid, alpha, report, &tag)?;
            if let Some(worst) = oracle_equivalence(&domain, &matrix, alpha, &label, &mut oracle)? {
                report
                    .metrics
                    .push(Metric::at_most(format!("oracle_max_rel_err/{tag}"), worst, 0.02));
            }
            if domain.dim() == 2 {
                let traj = checked_evolve(&matrix, &f0, t_final, None, report, &format!("pde/{tag}"))?;
                push_density(
                    &mut dens,
                    &RunTag {
                        process: "pde",
                        domain: &label,
                        alpha,
                        parameter: 0.0,
                    },
                    &traj.field(0),
                );
                push_density(
                    &mut dens,
                    &RunTag {
                        process: "pde",
                        domain: &label,
                        alpha,
                        parameter: 0.0,
                    },
                    &traj.final_field(),
                );
            }
        }
        if domain.dim() != 1 {
            continue;
        }

        for &alpha in &alphas {
            let tag = format!("{label}/alpha={alpha}");
            let matrix = assemble_for(&domain, &grid, alpha, report, &format!("jump/{tag}"))?;
            let traj = checked_evolve(&matrix, &f0, t_final, None, report, &format!("jump/{tag}"))?;
            let pde: Vec<_> = times.iter().map(|&t| traj.at_time(t)).collect();
            for f in &pde {
                push_density(
                    &mut dens,
                    &RunTag {
                        process: "pde",
                        domain: &label,
                        alpha,
                        parameter: 0.0,
                    },
                    f,
                );
            }

            let r_min = *r_mins.last().expect("at least one r_min");
            let run = JumpRunConfig {
                alpha,
                r_min,
                t_final,
                n_particles: n,
                seed: config.seed(),
                snapshot_times: times.clone(),
                initial_density: init.clone(),
            };
            let (_, fields, survival) = jump_mc::run(&run, &domain, &grid)?;
            for ((f, p), &s) in fields.iter().zip(&pde).zip(&survival) {
                push_density(
                    &mut dens,
                    &RunTag {
                        process: "jump",
                        domain: &label,
                        alpha,
                        parameter: r_min,
                    },
                    f,
                );
                comparison.push(vec![
                    label.clone().into(),
                    alpha.into(),
                    r_min.into(),
                    f.time.into(),
                    f.l1_distance(p).into(),
                    s.into(),
                    p.mass().into(),
                ]);
            }
            let l1 = fields.last().unwrap().l1_distance(pde.last().unwrap());
            report
                .metrics
                .push(Metric::at_most(format!("jump_l1/{tag}/r_min={r_min}"), l1, 0.05));
            report.metrics.push(Metric::at_most(
                format!("jump_survival_increases/{tag}"),
                survival_increases(&survival) as f64,
                0.0,
            ));
            report.metrics.push(Metric::info(
                format!("jump_survival_minus_pde_mass/{tag}"),
                survival.last().unwrap() - pde.last().unwrap().mass(),
            ));

            // kill hazard at the center approaches h_α from below as r_min shrinks
            let DomainKind::Interval { a, b } = *domain.kind() else {
                unreachable!()
            };
            let center = Vec2::on_line(0.5 * (a + b));
            let exact = h_alpha(&domain, center, alpha, &prm)?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed());
            rng.set_stream(1000 + k as u64);
            let mut est = Vec::new();
            for &r in &r_mins {
                let h = empirical_kill_hazard(&domain, center, alpha, r, n, &mut rng);
                hazards.push(vec![
                    label.clone().into(),
                    alpha.into(),
                    r.into(),
                    center.x.into(),
                    h.value.into(),
                    h.std_error.into(),
                    exact.into(),
                ]);
                est.push(h);
            }
            let above = est
                .iter()
                .map(|h| {
                    if h.std_error > 0.0 {
                        (h.value - exact) / h.std_error
                    } else if h.value > exact {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let last = est.last().unwrap();
            let final_dev = if last.std_error > 0.0 {
                (last.value - exact).abs() / last.std_error
            } else if last.value == exact {
                0.0
            } else {
                f64::INFINITY
            };
            let downward = est
                .windows(2)
                .filter(|w| w[1].value < w[0].value - 3.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt())
                .count();
            report
                .metrics
                .push(Metric::at_most(format!("hazard_sigma_above_h/{tag}"), above, 3.0));
            report
                .metrics
                .push(Metric::at_most(format!("hazard_final_sigma_dev/{tag}"), final_dev, 3.0));
            report.metrics.push(Metric::at_most(
                format!("hazard_downward_steps/{tag}"),
                downward as f64,
                0.0,
            ));

            // near the boundary the hazard is an order of magnitude larger
            let near = Vec2::on_line(b - 0.05 * (b - a) / 2.0);
            let hn = empirical_kill_hazard(&domain, near, alpha, r_min, n, &mut rng);
            let hn_exact = h_alpha(&domain, near, alpha, &prm)?;
            hazards.push(vec![
                label.clone().into(),
                alpha.into(),
                r_min.into(),
                near.x.into(),
                hn.value.into(),
                hn.std_error.into(),
                hn_exact.into(),
            ]);
            report.metrics.push(Metric::at_least(
                format!("hazard_boundary_over_center/{tag}"),
                hn.value / last.value,
                5.0,
            ));

            refinement(&domain, alpha, &levels, report, &label, &mut refine)?;
        }
    }
    report.detail(
        "event_rates",
        r_mins
            .iter()
            .map(|&r| (r, event_rate(alphas[0], r, 1)))
            .collect::<Vec<_>>(),
    );
    report.tables.push(comparison);
    report.tables.push(hazards);
    report.tables.push(oracle);
    report.tables.push(refine);
    report.tables.push(dens);
    Ok(())
}

pub(super) fn sampler_tests(config: &RunConfig, report: &mut Report) -> Result<(), ExperimentError> {
    let alphas = config.alphas_or(&[0.5, 1.0, 1.5]);
    let n = config.samples.unwrap_or(100_000);
    let mut table = Table::new(
        "sampler",
        &[
            "dim",
            "alpha",
            "ks_statistic",
            "ks_p_value",
            "mass_quadrature",
            "pareto_tail",
            "pareto_expected",
        ],
    );
    let mut stream = 0u64;
    for dim in [1usize, 2] {
        for &alpha in &alphas {
            let eq = equilibrium(alpha, dim)?;
            // separate streams, so either test's sample size leaves the other unchanged
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed());
            rng.set_stream(2 * stream);
            let mut jump_rng = ChaCha8Rng::seed_from_u64(config.seed());
            jump_rng.set_stream(2 * stream + 1);
            stream += 1;
            let speeds: Vec<f64> = (0..n)
                .map(|_| {
                    let v = eq.sample(&mut rng);
                    if dim == 1 {
                        v.x.abs()
                    } else {
                        v.norm()
                    }
                })
                .collect();
            let ks = ks_test(&speeds, |s| eq.speed_cdf(s));
            let mass = eq.mass_by_quadrature();
            let tag = format!("d={dim}/alpha={alpha}");
            report
                .metrics
                .push(Metric::at_least(format!("ks_p_value/{tag}"), ks.p_value, 0.01));
            report.metrics.push(Metric::at_most(
                format!("mass_quadrature_err/{tag}"),
                (mass - 1.0).abs(),
                1e-8,
            ));

            // truncated jump lengths: P(R > 2 r_min) = 2^{-α}, isotropic directions
            let r_min = 0.01;
            let jumps: Vec<Vec2<f64>> = (0..n).map(|_| sample_jump(&mut jump_rng, alpha, r_min, dim)).collect();
            let p = 2f64.powf(-alpha);
            let tail = jumps.iter().filter(|w| w.norm() > 2.0 * r_min).count() as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let shortest = jumps.iter().map(|w| w.norm()).fold(f64::INFINITY, f64::min);
            let mean_dir = jumps.iter().fold(Vec2::zero(), |s, w| s + *w * (1.0 / w.norm())) * (1.0 / n as f64);
            // a unit direction component has variance 1/d
            let dir_sigma = (1.0 / (dim * n) as f64).sqrt();
            report.metrics.push(Metric::at_most(
                format!("pareto_tail_sigma_dev/{tag}"),
                (tail - p).abs() / sigma,
                3.0,
            ));
            report.metrics.push(Metric::at_least(
                format!("shortest_jump_over_r_min/{tag}"),
                shortest / r_min,
                1.0,
            ));
            report.metrics.push(Metric::at_most(
                format!("direction_mean_sigma_dev/{tag}"),
                mean_dir.x.abs().max(mean_dir.y.abs()) / dir_sigma,
                3.0,
            ));
            table.push(vec![
                dim.into(),
                alpha.into(),
                ks.statistic.into(),
                ks.p_value.into(),
                mass.into(),
                tail.into(),
                p.into(),
            ]);
        }
    }
    report.tables.push(table);
    Ok(())
}
