//! Uniform cell grids over a domain's bounding box and piecewise-constant densities.

use crate::geometry::{DomainSpec, Vec2};
use crate::scalar::{from_usize, lit, Scalar};

/// Square cells of side `h` (intervals of length `h` in 1D) starting at `origin`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pub dim: usize,
    pub origin: Vec2<T>,
    pub h: T,
    pub nx: usize,
    pub ny: usize,
    /// Cell centers strictly inside Ω.
    pub inside: Vec<bool>,
}

impl<T: Scalar> Grid<T> {
    /// `cells` along the longer side of the bounding box.
    pub fn covering(domain: &DomainSpec<T>, cells: usize) -> Self {
        assert!(cells >= 2, "a grid needs at least two cells per axis");
        let (lo, hi) = domain.bounding_box();
        let dim = domain.dim();
        let (nx, ny, h) = if dim == 1 {
            (cells, 1, (hi.x - lo.x) / from_usize(cells))
        } else {
            let span = (hi.x - lo.x).max(hi.y - lo.y);
            let h = span / from_usize(cells);
            let fit = |w: T| ((w / h) - lit(1e-9)).ceil().to_usize().unwrap().max(1);
            (fit(hi.x - lo.x), fit(hi.y - lo.y), h)
        };
        let mut grid = Self {
            dim,
            origin: lo,
            h,
            nx,
            ny,
            inside: Vec::new(),
        };
        let tol = T::geo_tol();
        grid.inside = (0..grid.len())
            .map(|c| {
                let x = grid.center(c);
                let gap = domain.boundary_gap(x);
                if gap <= tol * lit(10.0) {
                    log::warn!("cell {c} center lies within tolerance of the boundary; treated as exterior");
                }
                domain.contains(x)
            })
            .collect();
        grid
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// h^d.
    pub fn cell_volume(&self) -> T {
        if self.dim == 1 {
            self.h
        } else {
            self.h * self.h
        }
    }

    pub fn center(&self, c: usize) -> Vec2<T> {
        let (i, j) = (c % self.nx, c / self.nx);
        let half = lit::<T>(0.5);
        if self.dim == 1 {
            Vec2::on_line(self.origin.x + self.h * (from_usize::<T>(i) + half))
        } else {
            Vec2::new(
                self.origin.x + self.h * (from_usize::<T>(i) + half),
                self.origin.y + self.h * (from_usize::<T>(j) + half),
            )
        }
    }

    /// Cell containing `x`, if it lies in the grid's box.
    pub fn locate(&self, x: Vec2<T>) -> Option<usize> {
        let fi = ((x.x - self.origin.x) / self.h).floor();
        if fi < T::zero() {
            return None;
        }
        let i = fi.to_usize()?;
        if i >= self.nx {
            return None;
        }
        if self.dim == 1 {
            return Some(i);
        }
        let fj = ((x.y - self.origin.y) / self.h).floor();
        if fj < T::zero() {
            return None;
        }
        let j = fj.to_usize()?;
        (j < self.ny).then_some(j * self.nx + i)
    }

    /// Nearest cell whose center is interior, used for particles sitting in
    /// a boundary cell whose own center falls outside Ω.
    pub fn nearest_inside(&self, c: usize) -> Option<usize> {
        if self.inside[c] {
            return Some(c);
        }
        let p = self.center(c);
        (0..self.len()).filter(|&k| self.inside[k]).min_by(|&a, &b| {
            let da = (self.center(a) - p).norm_sq();
            let db = (self.center(b) - p).norm_sq();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        })
    }

    /// Interior cells in row-major order; position k is unknown k of the solver.
    pub fn unknowns(&self) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.inside[c]).collect()
    }

    /// Linear (1D) or bilinear (2D) interpolation stencil of `x` on cell centers.
    /// Cells outside the box or the interior mask are dropped, which extends
    /// the field by zero.
    pub fn stencil(&self, x: Vec2<T>) -> ([(usize, T); 4], usize) {
        let mut out = [(0usize, T::zero()); 4];
        let mut n = 0;
        let half = lit::<T>(0.5);
        let gx = (x.x - self.origin.x) / self.h - half;
        let i0 = gx.floor();
        let tx = gx - i0;
        let axis = |base: T, count: usize| -> [(Option<usize>, bool); 2] {
            let lo = base.to_isize().unwrap_or(isize::MIN);
            let pick = |k: isize| (k >= 0 && (k as usize) < count).then_some(k as usize);
            [(pick(lo), true), (pick(lo + 1), false)]
        };
        let xs = axis(i0, self.nx);
        if self.dim == 1 {
            for (idx, first) in xs {
                if let Some(i) = idx {
                    let w = if first { T::one() - tx } else { tx };
                    if self.inside[i] && w > T::zero() {
                        out[n] = (i, w);
                        n += 1;
                    }
                }
            }
            return (out, n);
        }
        let gy = (x.y - self.origin.y) / self.h - half;
        let j0 = gy.floor();
        let ty = gy - j0;
        let ys = axis(j0, self.ny);
        for (jdx, jfirst) in ys {
            let Some(j) = jdx else { continue };
            let wy = if jfirst { T::one() - ty } else { ty };
            for (idx, ifirst) in xs {
                let Some(i) = idx else { continue };
                let wx = if ifirst { T::one() - tx } else { tx };
                let c = j * self.nx + i;
                let w = wx * wy;
                if self.inside[c] && w > T::zero() {
                    out[n] = (c, w);
                    n += 1;
                }
            }
        }
        (out, n)
    }
}

/// Piecewise-constant density on a grid; values vanish on exterior cells.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField<T> {
    pub grid: Grid<T>,
    pub values: Vec<T>,
    pub time: T,
}

impl<T: Scalar> DensityField<T> {
    pub fn zeros(grid: Grid<T>, time: T) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![T::zero(); n],
            time,
        }
    }

    /// Samples `f` at interior cell centers.
    pub fn from_fn(grid: Grid<T>, time: T, f: impl Fn(Vec2<T>) -> T) -> Self {
        let values = (0..grid.len())
            .map(|c| if grid.inside[c] { f(grid.center(c)) } else { T::zero() })
            .collect();
        Self { grid, values, time }
    }

    /// Σ ρ_c h^d.
    pub fn mass(&self) -> T {
        self.values.iter().fold(T::zero(), |s, &v| s + v) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> T {
        (self.values.iter().fold(T::zero(), |s, &v| s + v * v) * self.grid.cell_volume()).sqrt()
    }

    /// Σ |ρ_c − σ_c| h^d; both fields must live on the same grid.
    pub fn l1_distance(&self, other: &Self) -> T {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |s, (&a, &b)| s + (a - b).abs())
            * self.grid.cell_volume()
    }

    /// Midpoint rule for ∫ ρ f dx.
    pub fn integrate_against(&self, f: impl Fn(Vec2<T>) -> T) -> T {
        (0..self.grid.len())
            .filter(|&c| self.grid.inside[c] && self.values[c] != T::zero())
            .fold(T::zero(), |s, c| s + self.values[c] * f(self.grid.center(c)))
            * self.grid.cell_volume()
    }

    /// Rescales to unit mass; a field without mass is left unchanged.
    pub fn normalized(mut self) -> Self {
        let m = self.mass();
        if m > T::zero() {
            for v in &mut self.values {
                *v /= m;
            }
        }
        self
    }

    /// Histogram of `points` with total mass `count / total`, so that absorbed
    /// or killed particles stay visible as lost mass. Points in exterior cells
    /// go to the nearest interior cell; points outside the box are ignored.
    pub fn histogram(grid: Grid<T>, time: T, points: &[Vec2<T>], total: usize) -> Self {
        let mut counts = vec![0u64; grid.len()];
        let mut strays: Vec<usize> = Vec::new();
        for p in points {
            if let Some(c) = grid.locate(*p) {
                if grid.inside[c] {
                    counts[c] += 1;
                } else {
                    strays.push(c);
                }
            }
        }
        if !strays.is_empty() {
            strays.sort_unstable();
            let mut last: Option<(usize, Option<usize>)> = None;
            for c in strays {
                let target = match last {
                    Some((prev, t)) if prev == c => t,
                    _ => grid.nearest_inside(c),
                };
                last = Some((c, target));
                if let Some(k) = target {
                    counts[k] += 1;
                }
            }
        }
        let scale = T::one() / (from_usize::<T>(total.max(1)) * grid.cell_volume());
        let values = counts.iter().map(|&k| from_usize::<T>(k as usize) * scale).collect();
        Self { grid, values, time }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_grid_geometry() {
        let iv = DomainSpec::<f64>::interval(-1.0, 1.0).unwrap();
        let g = Grid::covering(&iv, 200);
        assert_eq!(g.len(), 200);
        assert!((g.h - 0.01).abs() < 1e-15);
        assert!((g.center(0).x + 0.995).abs() < 1e-14);
        assert!(g.inside.iter().all(|&b| b));
        assert_eq!(g.locate(Vec2::on_line(0.0)), Some(100));
        assert_eq!(g.locate(Vec2::on_line(1.5)), None);
    }

    #[test]
    fn disk_mask_and_volume() {
        let disk = DomainSpec::<f64>::unit_disk();
        let g = Grid::covering(&disk, 64);
        assert_eq!((g.nx, g.ny), (64, 64));
        let area = g.inside.iter().filter(|&&b| b).count() as f64 * g.cell_volume();
        assert!((area - std::f64::consts::PI).abs() < 0.05);
    }

    #[test]
    fn stencil_weights_sum_to_one_inside() {
        let disk = DomainSpec::<f64>::unit_disk();
        let g = Grid::covering(&disk, 32);
        let (s, n) = g.stencil(Vec2::new(0.13, -0.27));
        assert_eq!(n, 4);
        let total: f64 = s[..n].iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        // reproduces linear functions
        let f = |p: Vec2<f64>| 2.0 * p.x - p.y + 0.5;
        let x = Vec2::new(0.13, -0.27);
        let v: f64 = s[..n].iter().map(|&(c, w)| w * f(g.center(c))).sum();
        assert!((v - f(x)).abs() < 1e-13);
    }

    #[test]
    fn histogram_single_point_and_lost_mass() {
        let iv = DomainSpec::<f64>::interval(0.0, 1.0).unwrap();
        let g = Grid::covering(&iv, 10);
        let pts = vec![Vec2::on_line(0.55); 3];
        let f = DensityField::histogram(g, 0.0, &pts, 4);
        assert!((f.mass() - 0.75).abs() < 1e-15);
        assert_eq!(f.values.iter().filter(|&&v| v > 0.0).count(), 1);
    }
}
