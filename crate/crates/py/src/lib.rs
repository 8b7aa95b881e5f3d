//! Python bindings.
//!
//! Solver options are passed as keyword arguments using the same keys as the
//! command line (`levels`, `coarse_n`, `smoother`, `tol`, ...), and are
//! validated by the same parser.

use std::collections::BTreeMap;
use std::sync::Arc;

use anisomg::cli::RunConfig;
use anisomg::mesh::build_hierarchy;
use anisomg::{
    AnisotropySpec, CycleKind, Error, SmootherSpec, SmootherState, SolveReport, StencilOperator, StudyConfig,
    SweepAxis,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn config_from_kwargs(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut map = BTreeMap::new();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            let value = if let Ok((a, b)) = v.extract::<(usize, usize)>() {
                format!("{a},{b}")
            } else if let Ok(list) = v.extract::<Vec<String>>() {
                list.join(",")
            } else {
                v.str()?.to_string()
            };
            map.insert(key, value);
        }
    }
    RunConfig::from_map(&map).map_err(to_py)
}

/// Outcome of one multigrid solve.
#[pyclass(frozen, module = "anisomg_py")]
struct Report {
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    diverged: bool,
    #[pyo3(get)]
    residual_history: Vec<f64>,
    #[pyo3(get)]
    relative_history: Vec<f64>,
    #[pyo3(get)]
    convergence_factors: Vec<f64>,
    #[pyo3(get)]
    final_relative_residual: f64,
    #[pyo3(get)]
    wall_time: f64,
    #[pyo3(get)]
    shape: (usize, usize),
    #[pyo3(get)]
    solution: Vec<f64>,
}

impl Report {
    fn new(r: SolveReport, diverged: bool) -> Self {
        Report {
            iterations: r.iterations,
            converged: r.converged,
            diverged,
            relative_history: r.relative_history(),
            final_relative_residual: r.final_relative_residual(),
            convergence_factors: r.convergence_factors,
            wall_time: r.wall_time.as_secs_f64(),
            shape: (r.solution.ny, r.solution.nx),
            residual_history: r.residual_history,
            solution: r.solution.values,
        }
    }
}

#[pymethods]
impl Report {
    /// Geometric-mean reduction per cycle.
    fn mean_rate(&self) -> f64 {
        anisomg::convergence_rate(&self.relative_history)
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(iterations={}, converged={}, final_relative_residual={:.3e})",
            self.iterations, self.converged, self.final_relative_residual
        )
    }
}

/// Runs one solve; divergence is reported through `Report.diverged`.
#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn solve(py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Report> {
    let cfg = config_from_kwargs(kwargs)?.solver;
    let outcome = py.detach(move || cfg.solve());
    match outcome {
        Ok(r) => Ok(Report::new(r, false)),
        Err(Error::Divergence { report }) => Ok(Report::new(*report, true)),
        Err(e) => Err(to_py(e)),
    }
}

/// Runs a sweep and returns one dict per value; writes CSV files when `out` is given.
#[pyfunction]
#[pyo3(signature = (sweep, values, **kwargs))]
fn run_study<'py>(
    py: Python<'py>,
    sweep: &str,
    values: Vec<String>,
    kwargs: Option<&Bound<'py, PyDict>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut run = config_from_kwargs(kwargs)?;
    run.sweep = Some(sweep.parse::<SweepAxis>().map_err(to_py)?);
    run.values = values;
    let mut study: StudyConfig = run.study_config().map_err(to_py)?;
    if run.out.is_none() {
        study.output = None;
    }
    let result = py.detach(move || anisomg::run_study(&study)).map_err(to_py)?;
    result
        .rows
        .iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("sweep_value", &row.value)?;
            d.set_item("cycles", row.cycles)?;
            d.set_item("final_rel_residual", row.final_rel_residual)?;
            d.set_item("mean_rate", row.mean_rate)?;
            d.set_item("converged", row.converged)?;
            d.set_item("wall_ms", row.wall_time.as_secs_f64() * 1e3)?;
            d.set_item("history", row.relative_history.clone())?;
            Ok(d)
        })
        .collect()
}

/// Spectral radius estimate of one smoothing step on the finest configured level.
#[pyfunction]
#[pyo3(signature = (iterations=None, **kwargs))]
fn estimate_contraction(iterations: Option<usize>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<f64> {
    let cfg = config_from_kwargs(kwargs)?.solver;
    let h = build_hierarchy(cfg.levels, cfg.coarse_n, cfg.grading, cfg.coords).map_err(to_py)?;
    let grid = h.finest().clone();
    let op = Arc::new(StencilOperator::assemble(grid.clone(), cfg.aniso));
    let state = SmootherState::setup(cfg.cycle.smoother, op).map_err(to_py)?;
    let iterations = iterations.unwrap_or_else(|| anisomg::cli::probe_iterations(grid.nx.max(grid.ny)));
    Ok(state.estimate_contraction(cfg.cycle.smoothing_omega, iterations))
}

/// `C^{-1} r` for a smoother on a single `nx` x `ny` level, `r` in row-major order.
#[pyfunction]
#[pyo3(signature = (smoother, nx, ny, r, smoother_omega=None, alpha=1.0, beta=1.0))]
fn apply_preconditioner(
    smoother: &str,
    nx: usize,
    ny: usize,
    r: Vec<f64>,
    smoother_omega: Option<f64>,
    alpha: f64,
    beta: f64,
) -> PyResult<Vec<f64>> {
    if r.len() != nx * ny {
        return Err(PyValueError::new_err(format!("expected {} values, got {}", nx * ny, r.len())));
    }
    let kind = smoother.parse().map_err(to_py)?;
    let spec = match smoother_omega {
        Some(w) => SmootherSpec::new(kind, w).map_err(to_py)?,
        None => SmootherSpec::with_default(kind),
    };
    let h = build_hierarchy(1, (nx, ny), anisomg::GradingSpec::uniform(), anisomg::CoordinateSystem::Cartesian)
        .map_err(to_py)?;
    let grid = h.finest().clone();
    let op = Arc::new(StencilOperator::assemble(grid.clone(), AnisotropySpec::new(alpha, beta).map_err(to_py)?));
    let state = SmootherState::setup(spec, op).map_err(to_py)?;
    Ok(state
        .apply_preconditioner(&anisomg::GridFunction::from_values(&grid, r))
        .values)
}

/// Graded nodes `0 = x_0 < ... < x_{n+1} = 1`.
#[pyfunction]
fn grade_axis(n: usize, factor: f64) -> PyResult<Vec<f64>> {
    anisomg::grade_axis(n, factor).map_err(to_py)
}

/// `(level, visit)` pairs of one cycle, `visit` being "pre", "solve" or "post".
#[pyfunction]
#[pyo3(signature = (levels, cycle="F"))]
fn cycle_schedule(levels: usize, cycle: &str) -> PyResult<Vec<(usize, &'static str)>> {
    let kind: CycleKind = cycle.parse().map_err(to_py)?;
    Ok(anisomg::cycle_schedule(levels, kind)
        .into_iter()
        .map(|(l, v)| {
            let name = match v {
                anisomg::Visit::Pre => "pre",
                anisomg::Visit::Solve => "solve",
                anisomg::Visit::Post => "post",
            };
            (l, name)
        })
        .collect())
}

#[pyfunction]
fn convergence_rate(history: Vec<f64>) -> f64 {
    anisomg::convergence_rate(&history)
}

#[pymodule]
fn anisomg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_contraction, m)?)?;
    m.add_function(wrap_pyfunction!(apply_preconditioner, m)?)?;
    m.add_function(wrap_pyfunction!(grade_axis, m)?)?;
    m.add_function(wrap_pyfunction!(cycle_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_rate, m)?)?;
    Ok(())
}
