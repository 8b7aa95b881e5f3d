//! Five-point conservative finite-difference operators for
//! `-alpha d/dx(k dU/dx) - beta d/dy(k dU/dy)` with coordinate metrics,
//! plus the grid functions they act on.
//!
//! Rows are multiplied by the control-volume metric so the assembled matrix is
//! symmetric, then the whole level is scaled by `(nx + 1) * (ny + 1)`; on an
//! equidistant Cartesian grid that is exactly the classic `1/h^2` stencil.
//! Couplings to boundary nodes are kept in the coefficient arrays (they are
//! part of the diagonal) but never act on unknowns: the boundary is
//! homogeneous Dirichlet.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{CoordinateSystem, LevelGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropySpec {
    pub alpha: f64,
    pub beta: f64,
}

impl AnisotropySpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (key, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(key, format!("must be a positive real, got {v}")));
            }
        }
        Ok(AnisotropySpec { alpha, beta })
    }

    pub fn isotropic() -> Self {
        AnisotropySpec {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl Default for AnisotropySpec {
    fn default() -> Self {
        AnisotropySpec::isotropic()
    }
}

/// Interior values of a scalar field on one level, row-major (`x` fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub level: usize,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &LevelGrid) -> Self {
        GridFunction {
            level: grid.level,
            nx: grid.nx,
            ny: grid.ny,
            values: vec![0.0; grid.neq()],
        }
    }

    pub fn from_values(grid: &LevelGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.neq(), "value count does not match level");
        GridFunction {
            level: grid.level,
            nx: grid.nx,
            ny: grid.ny,
            values,
        }
    }

    /// Samples `f(i, j)` at every interior node.
    pub fn from_fn(grid: &LevelGrid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.neq());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(i, j));
            }
        }
        GridFunction::from_values(grid, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_level(&self, other: &GridFunction) -> bool {
        self.level == other.level && self.nx == other.nx && self.ny == other.ny
    }

    pub(crate) fn assert_on(&self, grid: &LevelGrid) {
        assert!(
            self.level == grid.level && self.nx == grid.nx && self.ny == grid.ny,
            "grid function on level {} ({}x{}) used with level {} ({}x{})",
            self.level,
            self.nx,
            self.ny,
            grid.level,
            grid.nx,
            grid.ny
        );
    }

    fn assert_same(&self, other: &GridFunction) {
        assert!(self.same_level(other), "grid functions live on different levels");
    }

    pub fn dot(&self, other: &GridFunction) -> f64 {
        self.assert_same(other);
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &GridFunction) {
        self.assert_same(x);
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    /// Swaps the axes; element `(i, j)` moves to `(j, i)`.
    pub fn transposed(&self) -> GridFunction {
        let mut values = vec![0.0; self.len()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                values[i * self.ny + j] = self.values[j * self.nx + i];
            }
        }
        GridFunction {
            level: self.level,
            nx: self.ny,
            ny: self.nx,
            values,
        }
    }
}

/// Five-diagonal operator `A_l` on one level.
///
/// `n`/`s` couple to `(i, j +- 1)`, `e`/`w` to `(i +- 1, j)`.
#[derive(Debug, Clone)]
pub struct StencilOperator {
    pub grid: Arc<LevelGrid>,
    pub aniso: AnisotropySpec,
    pub c: Vec<f64>,
    pub n: Vec<f64>,
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub w: Vec<f64>,
    /// Every row is weakly diagonally dominant over its in-grid couplings.
    pub diagonally_dominant: bool,
}

impl StencilOperator {
    pub fn assemble(grid: Arc<LevelGrid>, aniso: AnisotropySpec) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let x = &grid.x_coords;
        let y = &grid.y_coords;
        let neq = nx * ny;
        let scale = ((nx + 1) * (ny + 1)) as f64;
        let mut c = vec![0.0; neq];
        let mut n = vec![0.0; neq];
        let mut s = vec![0.0; neq];
        let mut e = vec![0.0; neq];
        let mut w = vec![0.0; neq];

        for j in 0..ny {
            let jj = j + 1;
            let hy_n = y[jj + 1] - y[jj];
            let hy_s = y[jj] - y[jj - 1];
            let dy = 0.5 * (y[jj + 1] - y[jj - 1]);
            for i in 0..nx {
                let ii = i + 1;
                let hx_e = x[ii + 1] - x[ii];
                let hx_w = x[ii] - x[ii - 1];
                let dx = 0.5 * (x[ii + 1] - x[ii - 1]);

                let (m_e, m_w, m_n, m_s) = match grid.coord_system {
                    CoordinateSystem::Cartesian => (1.0, 1.0, 1.0, 1.0),
                    CoordinateSystem::Cylindrical => {
                        let r = x[ii];
                        (0.5 * (r + x[ii + 1]), 0.5 * (x[ii - 1] + r), r, r)
                    }
                    CoordinateSystem::Spherical => {
                        let sin_t = y[jj].sin();
                        let r_e = 0.5 * (x[ii] + x[ii + 1]);
                        let r_w = 0.5 * (x[ii - 1] + x[ii]);
                        (
                            r_e * r_e * sin_t,
                            r_w * r_w * sin_t,
                            (0.5 * (y[jj] + y[jj + 1])).sin(),
                            (0.5 * (y[jj - 1] + y[jj])).sin(),
                        )
                    }
                };

                let k = j * nx + i;
                e[k] = -scale * aniso.alpha * m_e * dy / hx_e;
                w[k] = -scale * aniso.alpha * m_w * dy / hx_w;
                n[k] = -scale * aniso.beta * m_n * dx / hy_n;
                s[k] = -scale * aniso.beta * m_s * dx / hy_s;
                c[k] = -(e[k] + w[k] + n[k] + s[k]);
            }
        }

        let mut op = StencilOperator {
            grid,
            aniso,
            c,
            n,
            s,
            e,
            w,
            diagonally_dominant: false,
        };
        op.diagonally_dominant = (0..neq).all(|k| op.inner_row_sum(k) >= -1e-12 * op.c[k]);
        op
    }

    pub fn nx(&self) -> usize {
        self.grid.nx
    }

    pub fn ny(&self) -> usize {
        self.grid.ny
    }

    pub fn neq(&self) -> usize {
        self.grid.neq()
    }

    pub fn level(&self) -> usize {
        self.grid.level
    }

    /// `c + (in-grid couplings)` of row `k`; positive on boundary-adjacent rows.
    pub fn inner_row_sum(&self, k: usize) -> f64 {
        let (nx, ny) = (self.nx(), self.ny());
        let (i, j) = (k % nx, k / nx);
        let mut sum = self.c[k];
        if i > 0 {
            sum += self.w[k];
        }
        if i + 1 < nx {
            sum += self.e[k];
        }
        if j > 0 {
            sum += self.s[k];
        }
        if j + 1 < ny {
            sum += self.n[k];
        }
        sum
    }

    /// `y = A x` into a caller-provided buffer.
    pub fn apply_into(&self, x: &GridFunction, y: &mut GridFunction) {
        x.assert_on(&self.grid);
        y.assert_on(&self.grid);
        let (nx, ny) = (self.nx(), self.ny());
        let xv = &x.values;
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let mut acc = self.c[k] * xv[k];
                if j + 1 < ny {
                    acc += self.n[k] * xv[k + nx];
                }
                if j > 0 {
                    acc += self.s[k] * xv[k - nx];
                }
                if i + 1 < nx {
                    acc += self.e[k] * xv[k + 1];
                }
                if i > 0 {
                    acc += self.w[k] * xv[k - 1];
                }
                y.values[k] = acc;
            }
        }
    }

    pub fn apply(&self, x: &GridFunction) -> GridFunction {
        let mut y = GridFunction::zeros(&self.grid);
        self.apply_into(x, &mut y);
        y
    }

    /// Defect `b - A x`.
    pub fn residual(&self, x: &GridFunction, b: &GridFunction) -> GridFunction {
        b.assert_on(&self.grid);
        let mut r = self.apply(x);
        for (ri, bi) in r.values.iter_mut().zip(&b.values) {
            *ri = bi - *ri;
        }
        r
    }

    /// Energy inner product `(A u, v)`.
    pub fn energy(&self, u: &GridFunction, v: &GridFunction) -> f64 {
        self.apply(u).dot(v)
    }

    pub fn direct_solve(&self, b: &GridFunction) -> Result<GridFunction> {
        Ok(crate::direct::DirectSolver::new(self)?.solve(b))
    }

    /// The operator of the axis-swapped problem.
    pub fn transposed(&self) -> StencilOperator {
        let (nx, ny) = (self.nx(), self.ny());
        let swap = |src: &[f64]| {
            let mut out = vec![0.0; src.len()];
            for j in 0..ny {
                for i in 0..nx {
                    out[i * ny + j] = src[j * nx + i];
                }
            }
            out
        };
        StencilOperator {
            grid: Arc::new(self.grid.transposed()),
            aniso: AnisotropySpec {
                alpha: self.aniso.beta,
                beta: self.aniso.alpha,
            },
            c: swap(&self.c),
            n: swap(&self.e),
            s: swap(&self.w),
            e: swap(&self.n),
            w: swap(&self.s),
            diagonally_dominant: self.diagonally_dominant,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_hierarchy, GradingSpec};

    fn grid(levels: usize, coords: CoordinateSystem) -> Arc<LevelGrid> {
        build_hierarchy(levels, (1, 1), GradingSpec::uniform(), coords)
            .unwrap()
            .finest()
            .clone()
    }

    #[test]
    fn classic_five_point_stencil() {
        let op = StencilOperator::assemble(grid(2, CoordinateSystem::Cartesian), AnisotropySpec::isotropic());
        for k in 0..9 {
            assert!((op.c[k] - 64.0).abs() < 1e-12);
            for v in [op.n[k], op.s[k], op.e[k], op.w[k]] {
                assert!((v + 16.0).abs() < 1e-12);
            }
        }
        assert!(op.diagonally_dominant);
    }

    #[test]
    fn alpha_scales_east_west_only() {
        let g = grid(2, CoordinateSystem::Cartesian);
        let a1 = StencilOperator::assemble(g.clone(), AnisotropySpec::isotropic());
        let a100 = StencilOperator::assemble(g, AnisotropySpec::new(100.0, 1.0).unwrap());
        for k in 0..9 {
            assert_eq!(a100.e[k], 100.0 * a1.e[k]);
            assert_eq!(a100.w[k], 100.0 * a1.w[k]);
            assert_eq!(a100.n[k], a1.n[k]);
            assert_eq!(a100.s[k], a1.s[k]);
        }
    }

    #[test]
    fn cylindrical_radial_row_matches_one_dimensional_operator() {
        // Independent 1-D oracle: -(r u')' on nodes r_0..r_4 multiplied by the
        // control-volume height, with face radii at cell midpoints.
        let g = grid(2, CoordinateSystem::Cylindrical);
        let op = StencilOperator::assemble(g.clone(), AnisotropySpec::isotropic());
        let r = &g.x_coords;
        let dz = 0.25;
        let scale = 16.0;
        for i in 1..=3 {
            let re = 0.5 * (r[i] + r[i + 1]);
            let rw = 0.5 * (r[i - 1] + r[i]);
            let east = -re * dz / (r[i + 1] - r[i]) * scale;
            let west = -rw * dz / (r[i] - r[i - 1]) * scale;
            let k = g.idx(i - 1, 1);
            assert!((op.e[k] - east).abs() < 1e-12);
            assert!((op.w[k] - west).abs() < 1e-12);
        }
        let k0 = g.idx(0, 1);
        let k2 = g.idx(2, 1);
        assert!(op.c[k2] > op.c[k0], "rows at larger r carry larger weights");
    }

    #[test]
    fn apply_zero_and_ones() {
        let op = StencilOperator::assemble(grid(2, CoordinateSystem::Cartesian), AnisotropySpec::isotropic());
        let z = GridFunction::zeros(&op.grid);
        assert!(op.apply(&z).values.iter().all(|&v| v == 0.0));

        let mut ones = z.clone();
        ones.fill(1.0);
        let y = op.apply(&ones);
        // corner rows keep two neighbours, edge rows three, the centre four
        let expected = [32.0, 16.0, 32.0, 16.0, 0.0, 16.0, 32.0, 16.0, 32.0];
        for (a, b) in y.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_of_zero_is_rhs() {
        let op = StencilOperator::assemble(grid(2, CoordinateSystem::Spherical), AnisotropySpec::isotropic());
        let b = GridFunction::from_fn(&op.grid, |i, j| (i + 2 * j) as f64);
        let r = op.residual(&GridFunction::zeros(&op.grid), &b);
        assert_eq!(r, b);
    }

    #[test]
    fn transposed_operator_swaps_axes() {
        let g = build_hierarchy(
            2,
            (1, 2),
            GradingSpec::new(3.0, 1.0).unwrap(),
            CoordinateSystem::Cartesian,
        )
        .unwrap()
        .finest()
        .clone();
        let op = StencilOperator::assemble(g.clone(), AnisotropySpec::new(5.0, 1.0).unwrap());
        let t = op.transposed();
        let u = GridFunction::from_fn(&g, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5);
        let mut diff = t.apply(&u.transposed());
        let expected = op.apply(&u).transposed();
        diff.axpy(-1.0, &expected);
        assert!(diff.norm_inf() <= 1e-12 * expected.norm_inf());
    }

    #[test]
    #[should_panic]
    fn level_mismatch_panics() {
        let op = StencilOperator::assemble(grid(2, CoordinateSystem::Cartesian), AnisotropySpec::isotropic());
        let other = GridFunction::zeros(&grid(3, CoordinateSystem::Cartesian));
        op.apply(&other);
    }
}
