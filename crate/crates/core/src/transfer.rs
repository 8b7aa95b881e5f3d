//! Grid transfer between nested levels.
//!
//! Prolongation is bilinear in the actual node coordinates; coarse boundary
//! nodes carry the Dirichlet value 0. Restriction is the transpose of
//! prolongation with each coarse row normalized by its weight sum, which is
//! full weighting `(1/4, 1/8, 1/16)` on equidistant grids.

use crate::mesh::LevelGrid;
use crate::operator::GridFunction;

/// Interpolation weights along one axis: for each fine interior node, the
/// contributing coarse interior nodes.
#[derive(Debug, Clone)]
struct AxisWeights {
    coarse_len: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl AxisWeights {
    fn new(fine: &[f64]) -> Self {
        let nf = fine.len() - 2;
        assert!(nf % 2 == 1, "fine axis with {nf} interior nodes has no nested parent");
        let nc = (nf - 1) / 2;
        let coarse_interior = |p: usize| (p >= 1 && p <= nc).then(|| p - 1);
        let rows = (1..=nf)
            .map(|p| {
                let mut row = Vec::with_capacity(2);
                if p % 2 == 0 {
                    if let Some(c) = coarse_interior(p / 2) {
                        row.push((c, 1.0));
                    }
                } else {
                    let (pl, pr) = ((p - 1) / 2, (p + 1) / 2);
                    let (xl, xr) = (fine[2 * pl], fine[2 * pr]);
                    let t = (fine[p] - xl) / (xr - xl);
                    if let Some(c) = coarse_interior(pl) {
                        row.push((c, 1.0 - t));
                    }
                    if let Some(c) = coarse_interior(pr) {
                        row.push((c, t));
                    }
                }
                row
            })
            .collect();
        AxisWeights {
            coarse_len: nc,
            rows,
        }
    }
}

/// Transfer operators between a level and its parent.
#[derive(Debug, Clone)]
pub struct Transfer {
    coarse_level: usize,
    fine_level: usize,
    wx: AxisWeights,
    wy: AxisWeights,
}

impl Transfer {
    /// Panics unless `coarse` is exactly the even-node subset of `fine`.
    pub fn new(coarse: &LevelGrid, fine: &LevelGrid) -> Self {
        assert!(nested(coarse, fine), "levels {} and {} are not nested", coarse.level, fine.level);
        Transfer {
            coarse_level: coarse.level,
            fine_level: fine.level,
            wx: AxisWeights::new(&fine.x_coords),
            wy: AxisWeights::new(&fine.y_coords),
        }
    }

    fn check(&self, f: &GridFunction, level: usize, nx: usize, ny: usize) {
        assert!(
            f.level == level && f.nx == nx && f.ny == ny,
            "grid function on level {} does not match transfer level {level}",
            f.level
        );
    }

    pub fn prolong(&self, coarse: &GridFunction) -> GridFunction {
        let (ncx, ncy) = (self.wx.coarse_len, self.wy.coarse_len);
        self.check(coarse, self.coarse_level, ncx, ncy);
        let (nfx, nfy) = (self.wx.rows.len(), self.wy.rows.len());
        let mut values = Vec::with_capacity(nfx * nfy);
        for row_y in &self.wy.rows {
            for row_x in &self.wx.rows {
                let mut v = 0.0;
                for &(cj, wy) in row_y {
                    for &(ci, wx) in row_x {
                        v += wx * wy * coarse.values[cj * ncx + ci];
                    }
                }
                values.push(v);
            }
        }
        GridFunction {
            level: self.fine_level,
            nx: nfx,
            ny: nfy,
            values,
        }
    }

    pub fn restrict(&self, fine: &GridFunction) -> GridFunction {
        let (nfx, nfy) = (self.wx.rows.len(), self.wy.rows.len());
        self.check(fine, self.fine_level, nfx, nfy);
        let (ncx, ncy) = (self.wx.coarse_len, self.wy.coarse_len);
        let mut num = vec![0.0; ncx * ncy];
        let mut den = vec![0.0; ncx * ncy];
        for (fj, row_y) in self.wy.rows.iter().enumerate() {
            for (fi, row_x) in self.wx.rows.iter().enumerate() {
                let d = fine.values[fj * nfx + fi];
                for &(cj, wy) in row_y {
                    for &(ci, wx) in row_x {
                        let w = wx * wy;
                        num[cj * ncx + ci] += w * d;
                        den[cj * ncx + ci] += w;
                    }
                }
            }
        }
        let values = num.iter().zip(&den).map(|(n, d)| n / d).collect();
        GridFunction {
            level: self.coarse_level,
            nx: ncx,
            ny: ncy,
            values,
        }
    }
}

/// Whether `coarse`'s nodes are the even-index nodes of `fine`.
pub fn nested(coarse: &LevelGrid, fine: &LevelGrid) -> bool {
    let axis = |c: &[f64], f: &[f64]| {
        f.len() == 2 * c.len() - 1 && c.iter().enumerate().all(|(k, &x)| x == f[2 * k])
    };
    coarse.level + 1 == fine.level
        && axis(&coarse.x_coords, &fine.x_coords)
        && axis(&coarse.y_coords, &fine.y_coords)
}

pub fn restrict(fine: &GridFunction, fine_grid: &LevelGrid, coarse_grid: &LevelGrid) -> GridFunction {
    Transfer::new(coarse_grid, fine_grid).restrict(fine)
}

pub fn prolong(coarse: &GridFunction, coarse_grid: &LevelGrid, fine_grid: &LevelGrid) -> GridFunction {
    Transfer::new(coarse_grid, fine_grid).prolong(coarse)
}
