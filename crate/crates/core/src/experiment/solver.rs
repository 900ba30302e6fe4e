//! Grid-solver pieces shared by the experiments: evolution with structure
//! checks, density tables, the oracle comparison and the refinement sweep.

use super::{ExperimentError, Metric, Report, Table};
use crate::density::{DensityField, Grid};
use crate::geometry::{DomainKind, DomainSpec};
use crate::grid_solver::{assemble, evolve, weak_residual, AssemblyParams, OperatorMatrix, Trajectory};
use crate::kinetic_mc::InitialDensity;
use crate::nonlocal_op::{generator, OperatorParams};
use crate::test_function::{Poly2, TestFunction, TimeProfile};

/// Sub-cells per axis when averaging ρ^in onto a grid.
const INIT_SUBCELLS: usize = 8;

pub(super) const DENSITY_HEADER: [&str; 10] = [
    "process",
    "domain",
    "alpha",
    "parameter",
    "snapshot_time",
    "cell_index",
    "x",
    "y",
    "density",
    "mass",
];

pub(super) fn density_table() -> Table {
    Table::new("densities", &DENSITY_HEADER)
}

/// Which run a density snapshot belongs to; `parameter` is ε, r_min or 0.
pub(super) struct RunTag<'a> {
    pub process: &'a str,
    pub domain: &'a str,
    pub alpha: f64,
    pub parameter: f64,
}

/// Appends the interior cells of `field`.
pub(super) fn push_density(table: &mut Table, tag: &RunTag, field: &DensityField<f64>) {
    let vol = field.grid.cell_volume();
    for c in 0..field.grid.len() {
        if !field.grid.inside[c] {
            continue;
        }
        let x = field.grid.center(c);
        let v = field.values[c];
        table.push(vec![
            tag.process.into(),
            tag.domain.into(),
            tag.alpha.into(),
            tag.parameter.into(),
            field.time.into(),
            c.into(),
            x.x.into(),
            x.y.into(),
            v.into(),
            (v * vol).into(),
        ]);
    }
}

pub(super) fn grid_for(domain: &DomainSpec<f64>, cells_1d: usize, cells_2d: usize) -> Grid<f64> {
    Grid::covering(domain, if domain.dim() == 1 { cells_1d } else { cells_2d })
}

pub(super) fn assemble_for(
    domain: &DomainSpec<f64>,
    grid: &Grid<f64>,
    alpha: f64,
    report: &mut Report,
    tag: &str,
) -> Result<OperatorMatrix<f64>, ExperimentError> {
    let m = assemble(domain, grid, alpha, &AssemblyParams::default())?;
    report.detail(&format!("assembly/{tag}"), m.stats);
    Ok(m)
}

/// Forward Euler at the largest admissible step, recording positivity,
/// L² and mass monotonicity as metrics under `tag`.
pub(super) fn checked_evolve(
    matrix: &OperatorMatrix<f64>,
    init: &DensityField<f64>,
    t_final: f64,
    dt: Option<f64>,
    report: &mut Report,
    tag: &str,
) -> Result<Trajectory<f64>, ExperimentError> {
    let traj = evolve(init, matrix, t_final, dt.unwrap_or_else(|| matrix.stable_step()))?;
    record_structure(&traj, report, tag);
    Ok(traj)
}

pub(super) fn record_structure(traj: &Trajectory<f64>, report: &mut Report, tag: &str) {
    report.metrics.push(Metric::at_least(
        format!("solver_min_value/{tag}"),
        traj.min_value(),
        0.0,
    ));
    report.metrics.push(Metric::at_most(
        format!("solver_l2_increases/{tag}"),
        traj.l2_increases() as f64,
        0.0,
    ));
    report.metrics.push(Metric::at_most(
        format!("solver_mass_increases/{tag}"),
        traj.mass_increases() as f64,
        0.0,
    ));
}

pub(super) fn initial_field(init: &InitialDensity<f64>, grid: &Grid<f64>) -> DensityField<f64> {
    init.field(grid, INIT_SUBCELLS)
}

/// Three smooth functions vanishing quadratically on ∂Ω: the matched bump and
/// two polynomial multiples of it.
fn oracle_functions(domain: &DomainSpec<f64>) -> Option<Vec<TestFunction<f64>>> {
    let base = super::operator::matched_bump(domain)?;
    let polys = if domain.dim() == 1 {
        [
            vec![(0, 0, 1.0), (1, 0, -0.6), (2, 0, 0.4)],
            vec![(0, 0, 1.0), (1, 0, 0.5)],
        ]
    } else {
        [
            vec![(0, 0, 1.0), (1, 0, -0.6), (1, 1, 0.4)],
            vec![(0, 0, 1.0), (1, 0, 0.5), (0, 2, 0.3)],
        ]
    };
    let mut out = vec![base.clone()];
    out.extend(polys.into_iter().map(|p| base.clone().with_poly(Poly2::new(p))));
    Some(out)
}

/// Matrix action on sampled test functions against the pointwise generator
/// at 20 interior cells at least 0.1 away from ∂Ω. Returns the worst relative error.
pub(super) fn oracle_equivalence(
    domain: &DomainSpec<f64>,
    matrix: &OperatorMatrix<f64>,
    alpha: f64,
    label: &str,
    table: &mut Table,
) -> Result<Option<f64>, ExperimentError> {
    let Some(functions) = oracle_functions(domain) else {
        return Ok(None);
    };
    let grid = &matrix.grid;
    let candidates: Vec<usize> = matrix
        .cells
        .iter()
        .copied()
        .filter(|&c| domain.boundary_gap(grid.center(c)) >= 0.1)
        .collect();
    if candidates.len() < 20 {
        return Err(ExperimentError::Config(format!(
            "grid on {label} too coarse for the oracle comparison"
        )));
    }
    let picks: Vec<usize> = (0..20)
        .map(|k| candidates[k * candidates.len() / 20 + candidates.len() / 40])
        .collect();
    let prm = OperatorParams::default();
    let mut worst: f64 = 0.0;
    for (f_idx, phi) in functions.iter().enumerate() {
        let sampled = DensityField::from_fn(grid.clone(), 0.0, |x| phi.value(x));
        let action = matrix.apply_field(&sampled)?;
        for &c in &picks {
            let x = grid.center(c);
            let g = generator(domain, phi, x, alpha, &prm)?;
            let e = (action.values[c] - g).abs() / g.abs();
            worst = worst.max(e);
            table.push(vec![
                label.into(),
                alpha.into(),
                f_idx.into(),
                x.x.into(),
                x.y.into(),
                action.values[c].into(),
                g.into(),
                e.into(),
            ]);
        }
    }
    Ok(Some(worst))
}

pub(super) fn refinement_table() -> Table {
    Table::new(
        "refinement",
        &["domain", "alpha", "cells", "h", "dt", "residual", "ratio"],
    )
}

pub(super) fn oracle_table() -> Table {
    Table::new(
        "oracle",
        &[
            "domain",
            "alpha",
            "function",
            "x",
            "y",
            "matrix_action",
            "generator",
            "rel_err",
        ],
    )
}

/// Weak residual under simultaneous halving of h and dt. The step at level j
/// is base/2^j with base chosen so that no level hits its stability bound.
pub(super) fn refinement(
    domain: &DomainSpec<f64>,
    alpha: f64,
    levels: &[usize],
    report: &mut Report,
    label: &str,
    table: &mut Table,
) -> Result<(), ExperimentError> {
    let DomainKind::Interval { a, b } = *domain.kind() else {
        return Err(ExperimentError::Config(
            "the refinement sweep runs on an interval".into(),
        ));
    };
    let t_final = 0.2;
    let len = b - a;
    let init = InitialDensity::Gaussian {
        mean: crate::geometry::Vec2::on_line(0.5 * (a + b) + 0.05 * len),
        std: 0.15 * len,
    };
    let phi = super::operator::matched_bump(domain)
        .expect("interval")
        .with_time(TimeProfile::CosineRamp { horizon: t_final });
    let matrices = levels
        .iter()
        .map(|&n| {
            Ok(assemble(
                domain,
                &Grid::covering(domain, n),
                alpha,
                &AssemblyParams::default(),
            )?)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let base = matrices
        .iter()
        .enumerate()
        .map(|(j, m)| m.stable_step() * 2f64.powi(j as i32))
        .fold(f64::INFINITY, f64::min);
    let mut prev: Option<f64> = None;
    let mut min_ratio = f64::INFINITY;
    for (j, (m, &n)) in matrices.iter().zip(levels).enumerate() {
        let dt = base / 2f64.powi(j as i32);
        let f0 = initial_field(&init, &m.grid);
        let traj = checked_evolve(
            m,
            &f0,
            t_final,
            Some(dt),
            report,
            &format!("refinement/{label}/cells={n}"),
        )?;
        let r = weak_residual(&f0, &traj, &phi, domain, alpha, &OperatorParams::default())?;
        let ratio = prev.map_or(f64::NAN, |p| p / r);
        if prev.is_some() {
            min_ratio = min_ratio.min(ratio);
        }
        table.push(vec![
            label.into(),
            alpha.into(),
            n.into(),
            m.grid.h.into(),
            traj.dt.into(),
            r.into(),
            ratio.into(),
        ]);
        prev = Some(r);
    }
    report.metrics.push(Metric::at_least(
        format!("refinement_min_ratio/{label}/alpha={alpha}"),
        min_ratio,
        1.5,
    ));
    Ok(())
}
