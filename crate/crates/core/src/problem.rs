//! An assembled multilevel problem: grids, one operator per level and a
//! finest-level right-hand side.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::GridHierarchy;
use crate::operator::{AnisotropySpec, GridFunction, StencilOperator};

#[derive(Debug, Clone)]
pub struct Problem {
    pub hierarchy: GridHierarchy,
    pub aniso: AnisotropySpec,
    /// Re-discretized operator per level, coarsest first.
    pub operators: Vec<Arc<StencilOperator>>,
    pub rhs: GridFunction,
    /// Discrete solution when it is known.
    pub exact: Option<GridFunction>,
}

impl Problem {
    pub fn new(hierarchy: GridHierarchy, aniso: AnisotropySpec, rhs: GridFunction) -> Result<Self> {
        if !rhs.same_level(&GridFunction::zeros(hierarchy.finest())) {
            return Err(Error::invalid("rhs", "right-hand side must live on the finest level"));
        }
        let operators = hierarchy
            .levels
            .iter()
            .map(|g| Arc::new(StencilOperator::assemble(g.clone(), aniso)))
            .collect();
        Ok(Problem {
            hierarchy,
            aniso,
            operators,
            rhs,
            exact: None,
        })
    }

    /// `b = A u*` with `u* = sin(pi xi) sin(pi eta)` on the computational square,
    /// so `u*` is the exact discrete solution.
    pub fn manufactured(hierarchy: GridHierarchy, aniso: AnisotropySpec) -> Self {
        let finest = hierarchy.finest().clone();
        let exact = GridFunction::from_fn(&finest, |i, j| {
            let (xi, eta) = finest.unit_position(i, j);
            (PI * xi).sin() * (PI * eta).sin()
        });
        let mut p = Problem::new(hierarchy, aniso, GridFunction::zeros(&finest))
            .expect("zero rhs lives on the finest level");
        p.rhs = p.finest_operator().apply(&exact);
        p.exact = Some(exact);
        p
    }

    pub fn num_levels(&self) -> usize {
        self.hierarchy.num_levels()
    }

    /// Operator of `level` (1-based).
    pub fn operator(&self, level: usize) -> &Arc<StencilOperator> {
        &self.operators[level - 1]
    }

    pub fn finest_operator(&self) -> &Arc<StencilOperator> {
        self.operators.last().expect("at least one level")
    }

    /// Energy norm `(A e, e)^{1/2}` of `u* - u` on the finest level.
    pub fn energy_error(&self, u: &GridFunction) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let mut e = exact.clone();
        e.axpy(-1.0, u);
        Some(self.finest_operator().energy(&e, &e).max(0.0).sqrt())
    }
}
