//! Explicit solver for ∂ₜρ = −h_α ρ + L_α ρ on a uniform grid.
//!
//! Row i of the matrix discretizes the generator at the center x_i with the
//! field extended by zero outside Ω:
//!
//! * for r < r_c = m·h the paired second difference is replaced by
//!   r²σᵀ∇²φσ and the angular sum by (|S|/2d)·Δ_h, a 3- or 5-point stencil;
//! * on [r_c, diam Ω] every ray uses the same Gauss panels and (bi)linear
//!   interpolation of cell values; beyond diam Ω the kernel mass is analytic;
//! * each quadrature node's mass is subtracted on the diagonal, so nodes
//!   landing outside Ω become the killing term −h_α.
//!
//! On a convex domain this is exactly the generator and the row only depends
//! on the cell offset, so the matrix is symmetric by construction. On a
//! non-convex domain a ray stops at its first exit (hidden points kill) and the
//! small asymmetry that leaves is averaged out, keeping each row sum.
//! Nonnegative off-diagonals with nonpositive row and column sums make forward
//! Euler positive, mass- and L²-contractive under dt ≤ 0.9 / max|a_ii|.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::density::{DensityField, Grid};
use crate::geometry::{angular_rule, DomainSpec};
use crate::nonlocal_op::{check_alpha, generator, rays, OperatorError, OperatorParams};
use crate::quadrature::GaussLegendre;
use crate::scalar::{from_usize, gamma, lit, sphere_area, Scalar};
use crate::test_function::TestFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("grid spacing {h} is not below a quarter of the inradius {inradius}")]
    GridTooCoarse { h: f64, inradius: f64 },
    #[error("field lives on a different grid than the matrix")]
    GridMismatch,
    #[error("final time must be positive, got {0}")]
    BadHorizon(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyParams<T> {
    pub operator: OperatorParams<T>,
    /// Gauss–Legendre nodes per radial panel.
    pub gauss_points: usize,
    /// Radius of the Taylor core in cells: r_c = core_cells·h.
    pub core_cells: T,
    pub symmetrize: bool,
}

impl<T: Scalar> Default for AssemblyParams<T> {
    fn default() -> Self {
        Self {
            operator: OperatorParams::default().with_n_dir(256),
            gauss_points: 3,
            core_cells: lit(4.0),
            symmetrize: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AssemblyStats {
    pub rows: usize,
    pub nonzeros: usize,
    pub n_dir: usize,
    pub gauss_points: usize,
    pub symmetrized: bool,
    /// max_i Σ_j |a_ij − a_ji| / |a_ii| before symmetrization.
    pub max_asymmetry: f64,
    pub max_abs_diagonal: f64,
    /// Largest row and column sums; both must be ≤ 0 for a contractive step.
    pub max_row_sum: f64,
    pub max_column_sum: f64,
}

/// Discrete generator over the interior cells, stored as CSR without the diagonal.
#[derive(Clone, Debug)]
pub struct OperatorMatrix<T> {
    pub grid: Grid<T>,
    /// Cell index of each unknown.
    pub cells: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    diag: Vec<T>,
    pub stats: AssemblyStats,
}

impl<T: Scalar> OperatorMatrix<T> {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    /// Off-diagonal entries (column, value) of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn row_sum(&self, i: usize) -> T {
        self.row(i).fold(self.diag[i], |s, (_, v)| s + v)
    }

    pub fn min_off_diagonal(&self) -> T {
        self.vals.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_abs_diagonal(&self) -> T {
        self.diag.iter().fold(T::zero(), |m, d| m.max(d.abs()))
    }

    /// c·A, e.g. the kinetic limit with a normalized equilibrium runs at c = C.
    pub fn scaled(&self, c: T) -> Self {
        let mut m = self.clone();
        for v in m.vals.iter_mut().chain(m.diag.iter_mut()) {
            *v *= c;
        }
        m.stats.max_abs_diagonal *= c.to_f64().unwrap();
        m.stats.max_row_sum *= c.to_f64().unwrap();
        m.stats.max_column_sum *= c.to_f64().unwrap();
        m
    }

    /// Largest explicit Euler step the solver accepts.
    pub fn stable_step(&self) -> T {
        lit::<T>(0.9) / self.max_abs_diagonal()
    }

    /// y = A u on the unknowns.
    pub fn apply(&self, u: &[T]) -> Vec<T> {
        (0..self.size())
            .into_par_iter()
            .map(|i| self.row(i).fold(self.diag[i] * u[i], |s, (j, v)| s + v * u[j]))
            .collect()
    }

    /// Matrix action on a full-grid field, returned on the full grid.
    pub fn apply_field(&self, field: &DensityField<T>) -> Result<DensityField<T>, SolverError> {
        let u = self.restrict(field)?;
        let y = self.apply(&u);
        Ok(self.extend(&y, field.time))
    }

    pub fn restrict(&self, field: &DensityField<T>) -> Result<Vec<T>, SolverError> {
        if field.grid != self.grid {
            return Err(SolverError::GridMismatch);
        }
        Ok(self.cells.iter().map(|&c| field.values[c]).collect())
    }

    pub fn extend(&self, u: &[T], time: T) -> DensityField<T> {
        let mut f = DensityField::zeros(self.grid.clone(), time);
        for (&c, &v) in self.cells.iter().zip(u) {
            f.values[c] = v;
        }
        f
    }

    /// (I + dt A)u, written so every term is nonnegative when u is.
    fn euler_step(&self, u: &[T], dt: T) -> Vec<T> {
        (0..self.size())
            .into_par_iter()
            .map(|i| {
                let off = self.row(i).fold(T::zero(), |s, (j, v)| s + v * u[j]);
                (T::one() + dt * self.diag[i]) * u[i] + dt * off
            })
            .collect()
    }
}

/// Panel ends on [r0, r1]. Below `h` lengths double from r0; above it the
/// breakpoints sit at multiples of `h`, where interpolated cell values along an
/// axis-aligned ray have their kinks.
fn radial_panels<T: Scalar>(r0: T, r1: T, h: T) -> Vec<(T, T)> {
    let mut out = Vec::new();
    if r1 <= r0 {
        return out;
    }
    let sliver = h * lit(1e-6);
    let mut a = r0;
    while a < r1 {
        let mut b = if a < h {
            (a + a).min(h)
        } else {
            ((a / h + lit(1e-9)).floor() + T::one()) * h
        };
        if r1 - b <= sliver {
            b = r1;
        }
        out.push((a, b));
        a = b;
    }
    out
}

/// Assembles the discrete generator. Requires h < inradius / 4.
pub fn assemble<T: Scalar>(
    domain: &DomainSpec<T>,
    grid: &Grid<T>,
    alpha: T,
    params: &AssemblyParams<T>,
) -> Result<OperatorMatrix<T>, SolverError> {
    check_alpha(alpha)?;
    let inradius = domain.inradius();
    if grid.h * lit(4.0) >= inradius {
        return Err(SolverError::GridTooCoarse {
            h: grid.h.to_f64().unwrap(),
            inradius: inradius.to_f64().unwrap(),
        });
    }
    if domain.dim() == 2 {
        params.operator.validate()?;
    }
    let cells = grid.unknowns();
    let mut unknown_of = vec![usize::MAX; grid.len()];
    for (k, &c) in cells.iter().enumerate() {
        unknown_of[c] = k;
    }
    let gl = GaussLegendre::<T>::new(params.gauss_points.max(1));
    let table: Rows<T> = if domain.is_convex() {
        let kernel = OffsetKernel::build(domain, grid, alpha, params, &gl);
        cells.par_iter().map(|&c| kernel.row(grid, &unknown_of, c)).collect()
    } else {
        let rows: Vec<Result<(Vec<(usize, T)>, T), SolverError>> = cells
            .par_iter()
            .map(|&c| assemble_row(domain, grid, &unknown_of, c, alpha, params, &gl, true))
            .collect();
        rows.into_iter().collect::<Result<_, _>>()?
    };

    let (max_asym, table) = symmetrize(table, params.symmetrize);
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = Vec::with_capacity(table.len());
    for (entries, d) in table {
        for (j, v) in entries {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
        diag.push(d);
    }
    let mut m = OperatorMatrix {
        grid: grid.clone(),
        cells,
        row_ptr,
        cols,
        vals,
        diag,
        stats: AssemblyStats {
            rows: 0,
            nonzeros: 0,
            n_dir: if domain.dim() == 1 { 2 } else { params.operator.n_dir },
            gauss_points: params.gauss_points,
            symmetrized: params.symmetrize,
            max_asymmetry: max_asym,
            max_abs_diagonal: 0.0,
            max_row_sum: 0.0,
            max_column_sum: 0.0,
        },
    };
    m.stats.rows = m.size();
    m.stats.nonzeros = m.vals.len() + m.size();
    m.stats.max_abs_diagonal = m.max_abs_diagonal().to_f64().unwrap();
    let mut col = m.diag.clone();
    for i in 0..m.size() {
        for (j, v) in m.row(i) {
            col[j] += v;
        }
    }
    let top = |xs: &[T]| xs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b.to_f64().unwrap()));
    let rows: Vec<T> = (0..m.size()).map(|i| m.row_sum(i)).collect();
    m.stats.max_row_sum = top(&rows);
    m.stats.max_column_sum = top(&col);
    Ok(m)
}

#[allow(clippy::too_many_arguments)]
fn assemble_row<T: Scalar>(
    domain: &DomainSpec<T>,
    grid: &Grid<T>,
    unknown_of: &[usize],
    cell: usize,
    alpha: T,
    params: &AssemblyParams<T>,
    gl: &GaussLegendre<T>,
    visibility_cut: bool,
) -> Result<(Vec<(usize, T)>, T), SolverError> {
    let x = grid.center(cell);
    let rays = rays(domain, x, &params.operator)?;
    let g = gamma(alpha + T::one());
    let two = lit::<T>(2.0);
    let r_c = grid.h * params.core_cells;
    let far = domain.diameter();

    // dense accumulator over grid cells
    let mut acc = vec![T::zero(); grid.len()];
    let mut diag = T::zero();

    // Δ_h core; exterior neighbours carry zero
    let dim = domain.dim();
    let core = g * sphere_area::<T>(dim) / from_usize::<T>(2 * dim) * r_c.powf(two - alpha)
        / (two - alpha)
        / (grid.h * grid.h);
    diag -= core * from_usize::<T>(2 * dim);
    let (i, j) = (cell % grid.nx, cell / grid.nx);
    let mut neighbors = vec![];
    if i > 0 {
        neighbors.push(cell - 1);
    }
    if i + 1 < grid.nx {
        neighbors.push(cell + 1);
    }
    if dim == 2 {
        if j > 0 {
            neighbors.push(cell - grid.nx);
        }
        if j + 1 < grid.ny {
            neighbors.push(cell + grid.nx);
        }
    }
    for nb in neighbors {
        if grid.inside[nb] {
            acc[nb] += core;
        }
    }

    // Every ray runs over the same panels on [r_c, far]; mass beyond `far` is
    // analytic. Nodes outside Ω (or, off convex domains, past the first exit)
    // deposit nothing but still count on the diagonal: that is the kill term.
    let panels = radial_panels(r_c, far, grid.h);
    for ray in &rays {
        let cut = if visibility_cut { ray.dist } else { far + far };
        for &(p, q) in &panels {
            let mut pieces = [(p, q), (q, q)];
            if cut > p && cut < q {
                pieces = [(p, cut), (cut, q)];
            }
            for (a, b) in pieces {
                if b <= a {
                    continue;
                }
                let visible = b <= cut;
                for (r, w) in gl.mapped(a, b) {
                    let wt = g * ray.weight * w * r.powf(-T::one() - alpha);
                    diag -= wt;
                    if visible {
                        let (st, n) = grid.stencil(x + ray.sigma * r);
                        for &(c, sw) in &st[..n] {
                            acc[c] += wt * sw;
                        }
                    }
                }
            }
        }
        diag -= g * ray.weight * far.powf(-alpha) / alpha;
    }

    diag += acc[cell];
    acc[cell] = T::zero();
    let out: Vec<(usize, T)> = acc
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v != T::zero())
        .map(|(c, &v)| (unknown_of[c], v))
        .collect();
    Ok((out, diag))
}

type Rows<T> = Vec<(Vec<(usize, T)>, T)>;

/// On a convex domain a row depends on the column only through the cell
/// offset j − i, so the weights are computed once around a reference node.
struct OffsetKernel<T> {
    span: usize,
    width: usize,
    weights: Vec<T>,
    diag: T,
}

impl<T: Scalar> OffsetKernel<T> {
    fn build(
        domain: &DomainSpec<T>,
        grid: &Grid<T>,
        alpha: T,
        params: &AssemblyParams<T>,
        gl: &GaussLegendre<T>,
    ) -> Self {
        let dim = domain.dim();
        let far = domain.diameter();
        let span = (far / grid.h).ceil().to_usize().unwrap() + 2;
        let width = 2 * span + 1;
        let rows = if dim == 1 { 1 } else { width };
        let mut weights = vec![T::zero(); width * rows];
        let at = |dx: isize, dy: isize| {
            let ox = (dx + span as isize) as usize;
            let oy = if dim == 1 { 0 } else { (dy + span as isize) as usize };
            oy * width + ox
        };
        let g = gamma(alpha + T::one());
        let two = lit::<T>(2.0);
        let r_c = grid.h * params.core_cells;
        let mut diag = T::zero();

        let core = g * sphere_area::<T>(dim) / from_usize::<T>(2 * dim) * r_c.powf(two - alpha)
            / (two - alpha)
            / (grid.h * grid.h);
        diag -= core * from_usize::<T>(2 * dim);
        weights[at(-1, 0)] += core;
        weights[at(1, 0)] += core;
        if dim == 2 {
            weights[at(0, -1)] += core;
            weights[at(0, 1)] += core;
        }

        let panels = radial_panels(r_c, far, grid.h);
        for (sigma, weight) in angular_rule::<T>(dim, params.operator.n_dir) {
            for &(a, b) in &panels {
                for (r, w) in gl.mapped(a, b) {
                    let wt = g * weight * w * r.powf(-T::one() - alpha);
                    diag -= wt;
                    let px = sigma.x * r / grid.h;
                    let fx = px.floor();
                    let tx = px - fx;
                    let ix = fx.to_isize().unwrap();
                    let xs = [(ix, T::one() - tx), (ix + 1, tx)];
                    if dim == 1 {
                        for (dx, wx) in xs {
                            if wx > T::zero() {
                                weights[at(dx, 0)] += wt * wx;
                            }
                        }
                        continue;
                    }
                    let py = sigma.y * r / grid.h;
                    let fy = py.floor();
                    let ty = py - fy;
                    let iy = fy.to_isize().unwrap();
                    for (dy, wy) in [(iy, T::one() - ty), (iy + 1, ty)] {
                        for (dx, wx) in xs {
                            let v = wx * wy;
                            if v > T::zero() {
                                weights[at(dx, dy)] += wt * v;
                            }
                        }
                    }
                }
            }
            diag -= g * weight * far.powf(-alpha) / alpha;
        }
        let me = at(0, 0);
        diag += weights[me];
        weights[me] = T::zero();
        Self {
            span,
            width,
            weights,
            diag,
        }
    }

    fn row(&self, grid: &Grid<T>, unknown_of: &[usize], cell: usize) -> (Vec<(usize, T)>, T) {
        let (i, j) = ((cell % grid.nx) as isize, (cell / grid.nx) as isize);
        let span = self.span as isize;
        let mut out = Vec::new();
        for c in 0..grid.len() {
            if !grid.inside[c] || c == cell {
                continue;
            }
            let dx = (c % grid.nx) as isize - i;
            let dy = (c / grid.nx) as isize - j;
            if dx.abs() > span || dy.abs() > span {
                continue;
            }
            let k = ((dy + span) as usize) * self.width * usize::from(grid.dim == 2) + (dx + span) as usize;
            let v = self.weights[k];
            if v != T::zero() {
                out.push((unknown_of[c], v));
            }
        }
        (out, self.diag)
    }
}

/// (A + Aᵀ)/2 off the diagonal, diagonal reset so every row sum is unchanged.
fn symmetrize<T: Scalar>(rows: Rows<T>, apply: bool) -> (f64, Rows<T>) {
    let n = rows.len();
    let mut transpose: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for (i, (entries, _)) in rows.iter().enumerate() {
        for &(j, v) in entries {
            transpose[j].push((i, v));
        }
    }
    let mut max_asym = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for (i, (entries, d)) in rows.into_iter().enumerate() {
        let row_sum = entries.iter().fold(d, |s, e| s + e.1);
        // transpose[i] is sorted by construction
        let tr = &transpose[i];
        let (mut a, mut b) = (0, 0);
        let mut sym: Vec<(usize, T)> = Vec::with_capacity(entries.len().max(tr.len()));
        let mut asym = T::zero();
        while a < entries.len() || b < tr.len() {
            let ja = entries.get(a).map_or(usize::MAX, |e| e.0);
            let jb = tr.get(b).map_or(usize::MAX, |e| e.0);
            let (j, va, vb) = if ja == jb {
                a += 1;
                b += 1;
                (ja, entries[a - 1].1, tr[b - 1].1)
            } else if ja < jb {
                a += 1;
                (ja, entries[a - 1].1, T::zero())
            } else {
                b += 1;
                (jb, T::zero(), tr[b - 1].1)
            };
            asym += (va - vb).abs();
            sym.push((j, lit::<T>(0.5) * (va + vb)));
        }
        max_asym = max_asym.max((asym / d.abs()).to_f64().unwrap());
        if apply {
            let off = sym.iter().fold(T::zero(), |s, e| s + e.1);
            out.push((sym, row_sum - off));
        } else {
            out.push((entries, d));
        }
    }
    (max_asym, out)
}

/// Forward Euler states on a uniform time grid.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub grid: Grid<T>,
    pub cells: Vec<usize>,
    pub dt: T,
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub mass: Vec<T>,
    pub l2: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn field(&self, step: usize) -> DensityField<T> {
        let mut f = DensityField::zeros(self.grid.clone(), self.times[step]);
        for (&c, &v) in self.cells.iter().zip(&self.states[step]) {
            f.values[c] = v;
        }
        f
    }

    pub fn final_field(&self) -> DensityField<T> {
        self.field(self.states.len() - 1)
    }

    /// Linear interpolation in time between stored steps (clamped to the range).
    pub fn at_time(&self, t: T) -> DensityField<T> {
        let last = self.states.len() - 1;
        let pos = (t / self.dt).max(T::zero());
        let k = pos.floor().to_usize().unwrap_or(last).min(last);
        if k == last {
            return self.field(last);
        }
        let theta = pos - from_usize(k);
        let mut f = DensityField::zeros(self.grid.clone(), t);
        for (idx, &c) in self.cells.iter().enumerate() {
            f.values[c] = self.states[k][idx] * (T::one() - theta) + self.states[k + 1][idx] * theta;
        }
        f
    }

    /// Smallest value over all states.
    pub fn min_value(&self) -> T {
        self.states.iter().flatten().fold(T::infinity(), |m, &v| m.min(v))
    }

    /// Steps whose L² norm exceeds the previous one.
    pub fn l2_increases(&self) -> usize {
        self.l2.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn mass_increases(&self) -> usize {
        self.mass.windows(2).filter(|w| w[1] > w[0]).count()
    }
}

/// Forward Euler from `field` to `t_final` with n = ⌈T/dt⌉ equal steps.
pub fn evolve<T: Scalar>(
    field: &DensityField<T>,
    matrix: &OperatorMatrix<T>,
    t_final: T,
    dt: T,
) -> Result<Trajectory<T>, SolverError> {
    let bound = matrix.stable_step();
    if !(dt > T::zero()) || dt > bound {
        return Err(SolverError::StepTooLarge {
            dt: dt.to_f64().unwrap(),
            bound: bound.to_f64().unwrap(),
        });
    }
    if !(t_final > T::zero()) {
        return Err(SolverError::BadHorizon(t_final.to_f64().unwrap()));
    }
    let steps = (t_final / dt - lit(1e-9)).ceil().to_usize().unwrap().max(1);
    let dt_eff = t_final / from_usize(steps);
    let vol = field.grid.cell_volume();
    let norms = |u: &[T]| {
        let m = u.iter().fold(T::zero(), |s, &v| s + v) * vol;
        let l2 = (u.iter().fold(T::zero(), |s, &v| s + v * v) * vol).sqrt();
        (m, l2)
    };
    let mut u = matrix.restrict(field)?;
    let (m0, l0) = norms(&u);
    let mut traj = Trajectory {
        grid: field.grid.clone(),
        cells: matrix.cells.clone(),
        dt: dt_eff,
        times: vec![field.time],
        states: vec![u.clone()],
        mass: vec![m0],
        l2: vec![l0],
    };
    for n in 1..=steps {
        u = matrix.euler_step(&u, dt_eff);
        let (m, l) = norms(&u);
        traj.times.push(field.time + dt_eff * from_usize(n));
        traj.states.push(u.clone());
        traj.mass.push(m);
        traj.l2.push(l);
    }
    Ok(traj)
}

/// |∫ρ^in φ(0) + ∫₀^T∫ ρ ∂ₜφ + ∫₀^T∫ ρ(L_α φ − h_α φ)|, with midpoint sums in
/// space, ρ held at the Euler state over each step, and the generator
/// evaluated pointwise at the cell centers.
pub fn weak_residual<T: Scalar>(
    initial: &DensityField<T>,
    trajectory: &Trajectory<T>,
    phi: &TestFunction<T>,
    domain: &DomainSpec<T>,
    alpha: T,
    params: &OperatorParams<T>,
) -> Result<T, SolverError> {
    let vol = initial.grid.cell_volume();
    let psi = &phi.time;
    let t0 = initial.time;
    let start = initial.integrate_against(|x| phi.value(x)) * psi.value(t0);

    let centers: Vec<_> = trajectory.cells.iter().map(|&c| trajectory.grid.center(c)).collect();
    let gens: Vec<Result<T, OperatorError>> = centers
        .par_iter()
        .map(|&x| generator(domain, phi, x, alpha, params))
        .collect();
    let mut gen = Vec::with_capacity(gens.len());
    for g in gens {
        gen.push(g?);
    }
    let values: Vec<T> = centers.iter().map(|&x| phi.value(x)).collect();

    // ρ is the Euler state u_k on [t_k, t_{k+1}); ψ and ψ' are integrated exactly
    let n = trajectory.states.len();
    let mut integral = T::zero();
    for k in 0..n - 1 {
        let (a, b) = (trajectory.times[k], trajectory.times[k + 1]);
        let (dpsi, ipsi) = (psi.value(b) - psi.value(a), psi.integral(a, b));
        integral += trajectory.states[k]
            .iter()
            .zip(values.iter().zip(&gen))
            .fold(T::zero(), |s, (&r, (&v, &g))| s + r * (v * dpsi + g * ipsi))
            * vol;
    }
    Ok((start + integral).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    fn interval_setup(cells: usize) -> (DomainSpec<f64>, Grid<f64>, OperatorMatrix<f64>) {
        let iv = DomainSpec::interval(-1.0, 1.0).unwrap();
        let grid = Grid::covering(&iv, cells);
        let m = assemble(&iv, &grid, 1.0, &AssemblyParams::default()).unwrap();
        (iv, grid, m)
    }

    #[test]
    fn panels_cover_the_interval() {
        let p = radial_panels(0.01, 1.0, 0.1);
        assert_eq!(p[0].0, 0.01);
        assert_eq!(p.last().unwrap().1, 1.0);
        for w in p.windows(2) {
            assert_eq!(w[0].1, w[1].0);
            assert!(w[1].1 - w[1].0 <= 0.1 + 1e-15);
        }
    }

    #[test]
    fn sign_structure_and_center_value() {
        let (_, grid, m) = interval_setup(200);
        assert!(m.min_off_diagonal() >= 0.0);
        assert!(m.diagonal().iter().all(|&d| d < 0.0));
        for i in 0..m.size() {
            assert!(m.row_sum(i) < 0.0);
        }
        let phi = TestFunction::interval_bump(0.0, 1.0);
        let f = DensityField::from_fn(grid.clone(), 0.0, |x| phi.value(x));
        let out = m.apply_field(&f).unwrap();
        // the center lies between cells 99 and 100
        let c = 0.5 * (out.values[99] + out.values[100]);
        assert!((c + 16.0 / 3.0).abs() < 0.02 * 16.0 / 3.0, "{c}");
    }

    #[test]
    fn offset_kernel_matches_row_assembly_on_the_disk() {
        let disk = DomainSpec::<f64>::unit_disk();
        let grid = Grid::covering(&disk, 24);
        let params = AssemblyParams {
            operator: OperatorParams::default().with_n_dir(64),
            symmetrize: false,
            ..AssemblyParams::default()
        };
        let m = assemble(&disk, &grid, 0.7, &params).unwrap();
        assert!(m.stats.max_asymmetry < 1e-12);
        assert!(m.stats.max_column_sum < 0.0);
        let gl = GaussLegendre::new(params.gauss_points);
        let mut unknown_of = vec![usize::MAX; grid.len()];
        for (k, &c) in m.cells.iter().enumerate() {
            unknown_of[c] = k;
        }
        for k in [0, 37, m.size() / 2, m.size() - 1] {
            let (entries, d) = assemble_row(&disk, &grid, &unknown_of, m.cells[k], 0.7, &params, &gl, false).unwrap();
            assert!((d - m.diagonal()[k]).abs() < 1e-10 * d.abs());
            let row: Vec<(usize, f64)> = m.row(k).collect();
            assert_eq!(row.len(), entries.len());
            for ((a, va), (b, vb)) in row.iter().zip(&entries) {
                assert_eq!(a, b);
                assert!((va - vb).abs() < 1e-10 * d.abs());
            }
        }
    }

    #[test]
    fn constants_are_killed_at_rate_h() {
        let (iv, grid, _) = interval_setup(100);
        let raw = AssemblyParams {
            symmetrize: false,
            ..AssemblyParams::default()
        };
        let m = assemble(&iv, &grid, 1.3, &raw).unwrap();
        let f = DensityField::from_fn(grid.clone(), 0.0, |_| 1.0);
        let out = m.apply_field(&f).unwrap();
        let x = grid.center(50);
        let h = crate::nonlocal_op::h_alpha(&iv, x, 1.3, &OperatorParams::default()).unwrap();
        // the last half cell before ∂Ω interpolates against the zero exterior
        let rel = (out.values[50] + h).abs() / h;
        assert!(rel < 1e-2, "{rel}");
        assert!(out.values[50] <= -h);
    }

    #[test]
    fn evolution_is_positive_and_contractive() {
        let (_, grid, m) = interval_setup(100);
        let f0 = DensityField::from_fn(grid, 0.0, |x: Vec2<f64>| if x.x.abs() < 0.3 { 1.0 } else { 0.0 });
        let traj = evolve(&f0, &m, 0.05, m.stable_step()).unwrap();
        assert!(traj.min_value() >= 0.0);
        assert_eq!(traj.l2_increases(), 0);
        assert_eq!(traj.mass_increases(), 0);
        assert!(traj.mass.last().unwrap() < &traj.mass[0]);
        assert!(evolve(&f0, &m, 0.05, 2.0 * m.stable_step()).is_err());
        let zero = DensityField::zeros(f0.grid.clone(), 0.0);
        let z = evolve(&zero, &m, 0.05, m.stable_step()).unwrap();
        assert!(z.states.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn weak_residual_trivial_cases() {
        let (iv, grid, m) = interval_setup(50);
        let f0 = DensityField::from_fn(grid.clone(), 0.0, |x: Vec2<f64>| 1.0 - x.x * x.x);
        let phi = TestFunction::interval_bump(0.0, 1.0)
            .with_time(crate::test_function::TimeProfile::CosineRamp { horizon: 0.05 });
        let zero = evolve(&DensityField::zeros(grid, 0.0), &m, 0.05, m.stable_step()).unwrap();
        let prm = OperatorParams::default();
        let r = weak_residual(&f0, &zero, &phi, &iv, 1.0, &prm).unwrap();
        let expect = f0.integrate_against(|x| phi.value(x));
        assert!((r - expect).abs() < 1e-15);
        let traj = evolve(&f0, &m, 0.05, m.stable_step()).unwrap();
        let r0 = weak_residual(&f0, &traj, &TestFunction::zero(), &iv, 1.0, &prm).unwrap();
        assert_eq!(r0, 0.0);
    }
}
