//! Banded Cholesky factorization of a five-point operator.
//!
//! With row-major numbering the lower bandwidth is `nx`, so the factor costs
//! `neq * (nx + 1)` reals and `O(neq * nx^2)` work.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::LevelGrid;
use crate::operator::{GridFunction, StencilOperator};

#[derive(Debug, Clone)]
pub struct DirectSolver {
    grid: Arc<LevelGrid>,
    bw: usize,
    /// Row `i` holds `L[i][i - bw ..= i]`, left-padded where `i < bw`.
    factor: Vec<f64>,
}

impl DirectSolver {
    pub fn new(op: &StencilOperator) -> Result<Self> {
        let neq = op.neq();
        let nx = op.nx();
        let bw = if op.ny() > 1 { nx } else { 1 };
        let width = bw + 1;
        let mut l = vec![0.0; neq * width];
        let at = |i: usize, j: usize| i * width + (j + bw - i);

        for i in 0..neq {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut sum = lower_entry(op, i, j);
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    sum -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Factorization { row: i });
                    }
                    l[at(i, i)] = sum.sqrt();
                } else {
                    l[at(i, j)] = sum / l[at(j, j)];
                }
            }
        }
        Ok(DirectSolver {
            grid: op.grid.clone(),
            bw,
            factor: l,
        })
    }

    pub fn solve(&self, b: &GridFunction) -> GridFunction {
        b.assert_on(&self.grid);
        let neq = b.len();
        let bw = self.bw;
        let width = bw + 1;
        let l = &self.factor;
        let at = |i: usize, j: usize| i * width + (j + bw - i);

        let mut x = b.values.clone();
        for i in 0..neq {
            let mut sum = x[i];
            for k in i.saturating_sub(bw)..i {
                sum -= l[at(i, k)] * x[k];
            }
            x[i] = sum / l[at(i, i)];
        }
        for i in (0..neq).rev() {
            let mut sum = x[i];
            for k in (i + 1)..(i + 1 + bw).min(neq) {
                sum -= l[at(k, i)] * x[k];
            }
            x[i] = sum / l[at(i, i)];
        }
        GridFunction::from_values(&self.grid, x)
    }
}

/// `A[i][j]` for `j <= i`.
fn lower_entry(op: &StencilOperator, i: usize, j: usize) -> f64 {
    let nx = op.nx();
    if i == j {
        op.c[i]
    } else if j + 1 == i && !i.is_multiple_of(nx) {
        op.w[i]
    } else if j + nx == i {
        op.s[i]
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_hierarchy, CoordinateSystem, GradingSpec};
    use crate::operator::AnisotropySpec;

    fn op(levels: usize, n0: (usize, usize), coords: CoordinateSystem) -> StencilOperator {
        let h = build_hierarchy(levels, n0, GradingSpec::new(2.0, 1.5).unwrap(), coords).unwrap();
        StencilOperator::assemble(h.finest().clone(), AnisotropySpec::new(3.0, 1.0).unwrap())
    }

    #[test]
    fn scalar_system() {
        let a = op(1, (1, 1), CoordinateSystem::Cartesian);
        let b = GridFunction::from_values(&a.grid, vec![3.0]);
        let x = a.direct_solve(&b).unwrap();
        assert!((x.values[0] - 3.0 / a.c[0]).abs() < 1e-15);
    }

    #[test]
    fn recovers_known_solution() {
        for coords in CoordinateSystem::ALL {
            for n0 in [(1, 1), (2, 1), (1, 3), (5, 1)] {
                let a = op(3, n0, coords);
                let x_star = GridFunction::from_fn(&a.grid, |i, j| ((i * 13 + j * 7) % 11) as f64 - 5.0);
                let b = a.apply(&x_star);
                let x = a.direct_solve(&b).unwrap();
                let r = a.residual(&x, &b);
                assert!(r.norm_inf() <= 1e-10 * b.norm_inf().max(1.0));
                let mut err = x.clone();
                err.axpy(-1.0, &x_star);
                assert!(err.norm_inf() < 1e-10, "{coords} {n0:?}: {}", err.norm_inf());
            }
        }
    }

    #[test]
    fn single_row_grid() {
        let g = Arc::new(
            LevelGrid::from_coords(
                1,
                vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
                vec![0.0, 0.5, 1.0],
                CoordinateSystem::Cartesian,
            )
            .unwrap(),
        );
        let a = StencilOperator::assemble(g, AnisotropySpec::isotropic());
        let b = GridFunction::from_fn(&a.grid, |i, _| i as f64 + 1.0);
        let x = a.direct_solve(&b).unwrap();
        assert!(a.residual(&x, &b).norm_inf() < 1e-10 * b.norm_inf());
    }
}
