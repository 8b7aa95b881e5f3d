//! Structured tensor-product grids on the (mapped) unit square.
//!
//! A [`GridHierarchy`] is built by dyadic refinement: the finest level is
//! graded with [`grade_axis`] and every coarser level keeps every second node
//! of the next finer one, so all levels share one geometry and nest exactly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Inner radius used by the cylindrical and spherical mappings.
pub const R_MIN: f64 = 0.1;
/// Polar angle cut-off used by the spherical mapping: `theta in [THETA_MIN, pi - THETA_MIN]`.
pub const THETA_MIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoordinateSystem {
    /// `(x, y)` on `[0,1]^2`.
    Cartesian,
    /// `(r, z)` on `[R_MIN,1] x [0,1]`.
    Cylindrical,
    /// `(r, theta)` on `[R_MIN,1] x [THETA_MIN, pi - THETA_MIN]`.
    Spherical,
}

impl CoordinateSystem {
    pub const ALL: [CoordinateSystem; 3] = [
        CoordinateSystem::Cartesian,
        CoordinateSystem::Cylindrical,
        CoordinateSystem::Spherical,
    ];

    /// Physical extent of the first (x or r) axis.
    pub fn x_range(self) -> (f64, f64) {
        match self {
            CoordinateSystem::Cartesian => (0.0, 1.0),
            CoordinateSystem::Cylindrical | CoordinateSystem::Spherical => (R_MIN, 1.0),
        }
    }

    /// Physical extent of the second (y, z or theta) axis.
    pub fn y_range(self) -> (f64, f64) {
        match self {
            CoordinateSystem::Cartesian | CoordinateSystem::Cylindrical => (0.0, 1.0),
            CoordinateSystem::Spherical => (THETA_MIN, PI - THETA_MIN),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoordinateSystem::Cartesian => "cartesian",
            CoordinateSystem::Cylindrical => "cylindrical",
            CoordinateSystem::Spherical => "spherical",
        }
    }
}

impl fmt::Display for CoordinateSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CoordinateSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cartesian" => Ok(CoordinateSystem::Cartesian),
            "cylindrical" => Ok(CoordinateSystem::Cylindrical),
            "spherical" => Ok(CoordinateSystem::Spherical),
            other => Err(Error::invalid(
                "coords",
                format!("expected cartesian|cylindrical|spherical, got `{other}`"),
            )),
        }
    }
}

/// Ratio between adjacent cell widths along each axis (1 = equidistant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradingSpec {
    pub factor_x: f64,
    pub factor_y: f64,
}

impl GradingSpec {
    pub fn new(factor_x: f64, factor_y: f64) -> Result<Self> {
        check_factor("grading_x", factor_x)?;
        check_factor("grading_y", factor_y)?;
        Ok(GradingSpec { factor_x, factor_y })
    }

    pub fn uniform() -> Self {
        GradingSpec {
            factor_x: 1.0,
            factor_y: 1.0,
        }
    }
}

impl Default for GradingSpec {
    fn default() -> Self {
        GradingSpec::uniform()
    }
}

fn check_factor(key: &'static str, factor: f64) -> Result<()> {
    if factor.is_finite() && factor > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(key, format!("must be a positive real, got {factor}")))
    }
}

/// One level of a hierarchy. Node arrays include both boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelGrid {
    pub level: usize,
    pub nx: usize,
    pub ny: usize,
    pub x_coords: Vec<f64>,
    pub y_coords: Vec<f64>,
    pub coord_system: CoordinateSystem,
}

impl LevelGrid {
    /// Number of interior unknowns.
    pub fn neq(&self) -> usize {
        self.nx * self.ny
    }

    /// Row-major index of interior node `(i, j)`, both zero-based.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Interior node position on the computational unit square, as `(xi, eta)`.
    pub fn unit_position(&self, i: usize, j: usize) -> (f64, f64) {
        let (x0, x1) = (self.x_coords[0], self.x_coords[self.nx + 1]);
        let (y0, y1) = (self.y_coords[0], self.y_coords[self.ny + 1]);
        (
            (self.x_coords[i + 1] - x0) / (x1 - x0),
            (self.y_coords[j + 1] - y0) / (y1 - y0),
        )
    }

    /// The same grid with the axes swapped.
    pub fn transposed(&self) -> LevelGrid {
        LevelGrid {
            level: self.level,
            nx: self.ny,
            ny: self.nx,
            x_coords: self.y_coords.clone(),
            y_coords: self.x_coords.clone(),
            coord_system: self.coord_system,
        }
    }

    /// Single-level grid over explicit node arrays (boundary nodes included).
    pub fn from_coords(
        level: usize,
        x_coords: Vec<f64>,
        y_coords: Vec<f64>,
        coord_system: CoordinateSystem,
    ) -> Result<Self> {
        if x_coords.len() < 3 || y_coords.len() < 3 {
            return Err(Error::invalid(
                "coarse_n",
                "need at least one interior node per direction",
            ));
        }
        check_increasing("grading_x", &x_coords)?;
        check_increasing("grading_y", &y_coords)?;
        Ok(LevelGrid {
            level,
            nx: x_coords.len() - 2,
            ny: y_coords.len() - 2,
            x_coords,
            y_coords,
            coord_system,
        })
    }
}

fn check_increasing(key: &'static str, coords: &[f64]) -> Result<()> {
    if coords.windows(2).all(|w| w[1] > w[0]) {
        Ok(())
    } else {
        Err(Error::invalid(
            key,
            "grading too strong for this resolution: node coordinates are not strictly increasing",
        ))
    }
}

/// Levels ordered coarsest (index 0, level 1) to finest.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    pub levels: Vec<Arc<LevelGrid>>,
    pub grading: GradingSpec,
}

impl GridHierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Grid of `level` (1-based).
    pub fn level(&self, level: usize) -> &Arc<LevelGrid> {
        &self.levels[level - 1]
    }

    pub fn finest(&self) -> &Arc<LevelGrid> {
        self.levels.last().expect("hierarchy has at least one level")
    }

    pub fn coarsest(&self) -> &Arc<LevelGrid> {
        &self.levels[0]
    }
}

/// Nodes `0 = x_0 < ... < x_{n+1} = 1` whose `n + 1` cell widths grow
/// geometrically by `factor`.
pub fn grade_axis(n: usize, factor: f64) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::invalid("coarse_n", "need at least one interior point"));
    }
    check_factor("grading", factor)?;
    let cells = n + 1;
    let mut nodes = Vec::with_capacity(n + 2);
    if factor == 1.0 {
        nodes.extend((0..=cells).map(|k| k as f64 / cells as f64));
    } else {
        // Accumulate from the fine end so small widths keep their relative accuracy.
        let growth = -(cells as f64 * factor.ln()).exp_m1();
        let mut width = if factor > 1.0 {
            (1.0 - factor) / growth
        } else {
            (1.0 - factor) * factor.powi(n as i32) / growth
        };
        let mut from_fine = Vec::with_capacity(n);
        let mut acc = 0.0;
        for _ in 0..n {
            acc += width;
            from_fine.push(acc);
            width = if factor > 1.0 { width * factor } else { width / factor };
        }
        nodes.push(0.0);
        if factor > 1.0 {
            nodes.extend(from_fine);
        } else {
            nodes.extend(from_fine.iter().rev().map(|d| 1.0 - d));
        }
        nodes.push(1.0);
    }
    check_increasing("grading", &nodes)?;
    Ok(nodes)
}

/// Interior points on level `level` when the coarsest level has `n0`.
pub fn level_size(n0: usize, level: usize) -> usize {
    (1usize << (level - 1)) * (n0 + 1) - 1
}

pub fn build_hierarchy(
    levels: usize,
    coarse_n: (usize, usize),
    grading: GradingSpec,
    coords: CoordinateSystem,
) -> Result<GridHierarchy> {
    if levels < 1 {
        return Err(Error::invalid("levels", format!("must be >= 1, got {levels}")));
    }
    if levels > 16 {
        return Err(Error::invalid("levels", format!("must be <= 16, got {levels}")));
    }
    if coarse_n.0 < 1 || coarse_n.1 < 1 {
        return Err(Error::invalid("coarse_n", "both entries must be >= 1"));
    }
    check_factor("grading_x", grading.factor_x)?;
    check_factor("grading_y", grading.factor_y)?;

    let nx = level_size(coarse_n.0, levels);
    let ny = level_size(coarse_n.1, levels);
    let x_fine = map_axis(
        &grade_axis(nx, grading.factor_x).map_err(|e| rekey(e, "grading_x"))?,
        coords.x_range(),
        "grading_x",
    )?;
    let y_fine = map_axis(
        &grade_axis(ny, grading.factor_y).map_err(|e| rekey(e, "grading_y"))?,
        coords.y_range(),
        "grading_y",
    )?;

    let mut grids = Vec::with_capacity(levels);
    let mut x = x_fine;
    let mut y = y_fine;
    for level in (1..=levels).rev() {
        let grid = LevelGrid::from_coords(level, x.clone(), y.clone(), coords)?;
        x = x.iter().step_by(2).copied().collect();
        y = y.iter().step_by(2).copied().collect();
        grids.push(Arc::new(grid));
    }
    grids.reverse();
    Ok(GridHierarchy {
        levels: grids,
        grading,
    })
}

fn map_axis(unit: &[f64], (a, b): (f64, f64), key: &'static str) -> Result<Vec<f64>> {
    let last = unit.len() - 1;
    let mapped: Vec<f64> = unit
        .iter()
        .enumerate()
        .map(|(k, &t)| match k {
            0 => a,
            k if k == last => b,
            _ => a + (b - a) * t,
        })
        .collect();
    check_increasing(key, &mapped)?;
    Ok(mapped)
}

fn rekey(err: Error, key: &'static str) -> Error {
    match err {
        Error::InvalidArgument { msg, .. } => Error::InvalidArgument { key, msg },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn equidistant_axis() {
        assert_eq!(grade_axis(3, 1.0).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn graded_axis_matches_geometric_sum() {
        assert!(close(&grade_axis(1, 2.0).unwrap(), &[0.0, 1.0 / 3.0, 1.0], 1e-15));
        let expected = [0.0, 1.0 / 85.0, 5.0 / 85.0, 21.0 / 85.0, 1.0];
        assert!(close(&grade_axis(3, 4.0).unwrap(), &expected, 1e-15));
    }

    #[test]
    fn shrinking_factor_mirrors() {
        let nodes = grade_axis(3, 0.25).unwrap();
        let expected = [0.0, 64.0 / 85.0, 80.0 / 85.0, 84.0 / 85.0, 1.0];
        assert!(close(&nodes, &expected, 1e-15));
    }

    #[test]
    fn grade_axis_rejects_bad_input() {
        assert!(grade_axis(0, 1.0).is_err());
        assert!(grade_axis(3, 0.0).is_err());
        assert!(grade_axis(3, -2.0).is_err());
        assert!(grade_axis(3, f64::NAN).is_err());
    }

    #[test]
    fn extreme_grading_is_reported() {
        let err = build_hierarchy(
            6,
            (1, 1),
            GradingSpec::new(1.0, 8.0).unwrap(),
            CoordinateSystem::Spherical,
        )
        .unwrap_err();
        assert!(err.to_string().contains("grading_y"), "{err}");
    }

    #[test]
    fn single_level() {
        let h = build_hierarchy(1, (3, 3), GradingSpec::uniform(), CoordinateSystem::Cartesian)
            .unwrap();
        assert_eq!(h.num_levels(), 1);
        let g = h.finest();
        assert_eq!((g.nx, g.ny), (3, 3));
        assert_eq!(g.x_coords, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn three_uniform_levels_nest() {
        let h = build_hierarchy(3, (1, 1), GradingSpec::uniform(), CoordinateSystem::Cartesian)
            .unwrap();
        let sizes: Vec<_> = h.levels.iter().map(|g| (g.nx, g.ny)).collect();
        assert_eq!(sizes, vec![(1, 1), (3, 3), (7, 7)]);
        assert_eq!(h.level(1).x_coords[1..2], [0.5]);
        assert_eq!(h.level(2).x_coords[1..4], [0.25, 0.5, 0.75]);
        for k in 0..2 {
            let coarse = &h.levels[k];
            let fine = &h.levels[k + 1];
            for (ic, xc) in coarse.x_coords.iter().enumerate() {
                assert_eq!(*xc, fine.x_coords[2 * ic]);
            }
        }
    }

    #[test]
    fn graded_two_levels_take_every_second_node() {
        let h = build_hierarchy(
            2,
            (1, 1),
            GradingSpec::new(4.0, 1.0).unwrap(),
            CoordinateSystem::Cartesian,
        )
        .unwrap();
        assert_eq!(h.finest().x_coords, grade_axis(3, 4.0).unwrap());
        assert_eq!(h.coarsest().x_coords[1], h.finest().x_coords[2]);
        assert_eq!(h.finest().y_coords, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn curvilinear_ranges() {
        let h = build_hierarchy(2, (1, 1), GradingSpec::uniform(), CoordinateSystem::Spherical)
            .unwrap();
        let g = h.finest();
        assert_eq!(g.x_coords[0], R_MIN);
        assert_eq!(g.x_coords[g.nx + 1], 1.0);
        assert_eq!(g.y_coords[0], THETA_MIN);
        assert_eq!(g.y_coords[g.ny + 1], PI - THETA_MIN);
        let (xi, eta) = g.unit_position(1, 1);
        assert!((xi - 0.5).abs() < 1e-15 && (eta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_levels_rejected() {
        let err = build_hierarchy(0, (1, 1), GradingSpec::uniform(), CoordinateSystem::Cartesian)
            .unwrap_err();
        assert!(err.to_string().contains("levels"));
    }

    #[test]
    fn coordinate_system_parses() {
        for c in CoordinateSystem::ALL {
            assert_eq!(c.name().parse::<CoordinateSystem>().unwrap(), c);
        }
        assert!("polar".parse::<CoordinateSystem>().is_err());
    }
}
