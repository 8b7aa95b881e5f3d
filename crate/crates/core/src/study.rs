//! Convergence studies: one solve per sweep value, tabulated as CSV.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::mesh::{build_hierarchy, level_size, CoordinateSystem, GradingSpec};
use crate::mgcycle::{CycleSpec, MultigridSolver, SolveReport};
use crate::operator::{AnisotropySpec, GridFunction};
use crate::problem::Problem;
use crate::smoother::{SmootherKind, SmootherSpec};

/// How the finest-level start vector is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum StartVectorStrategy {
    Zero,
    /// Coarsest-level solve, then prolongation plus one smoothing step per level.
    Nested,
    /// A previously computed solution of the same shape.
    Continuation { source: GridFunction },
}

pub fn make_start_vector(strategy: &StartVectorStrategy, solver: &MultigridSolver<'_>) -> Result<GridFunction> {
    let finest = solver.problem().hierarchy.finest();
    match strategy {
        StartVectorStrategy::Zero => Ok(GridFunction::zeros(finest)),
        StartVectorStrategy::Nested => Ok(solver.nested_start()),
        StartVectorStrategy::Continuation { source } => {
            if source.nx != finest.nx || source.ny != finest.ny {
                return Err(Error::invalid(
                    "start",
                    format!(
                        "continuation source is {}x{}, problem is {}x{}",
                        source.nx, source.ny, finest.nx, finest.ny
                    ),
                ));
            }
            Ok(GridFunction::from_values(finest, source.values.clone()))
        }
    }
}

/// Start vector choice as written in a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StartChoice {
    Zero,
    Nested,
    /// Solve the same configuration with `alpha / 10` and start from its solution.
    Continuation,
}

/// Ratio between the target anisotropy and the continuation source anisotropy.
pub const CONTINUATION_STEP: f64 = 10.0;

impl StartChoice {
    pub fn name(self) -> &'static str {
        match self {
            StartChoice::Zero => "zero",
            StartChoice::Nested => "nested",
            StartChoice::Continuation => "continuation",
        }
    }
}

impl FromStr for StartChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(StartChoice::Zero),
            "nested" => Ok(StartChoice::Nested),
            "continuation" => Ok(StartChoice::Continuation),
            other => Err(Error::invalid(
                "start",
                format!("expected zero|nested|continuation, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for StartChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to build and solve one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub levels: usize,
    pub coarse_n: (usize, usize),
    pub grading: GradingSpec,
    pub coords: CoordinateSystem,
    pub aniso: AnisotropySpec,
    pub cycle: CycleSpec,
    pub start: StartChoice,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            levels: 4,
            coarse_n: (1, 1),
            grading: GradingSpec::uniform(),
            coords: CoordinateSystem::Cartesian,
            aniso: AnisotropySpec::isotropic(),
            cycle: CycleSpec::new(SmootherSpec::with_default(SmootherKind::GsAdi)),
            start: StartChoice::Zero,
        }
    }
}

impl SolverConfig {
    /// Manufactured-solution problem for this configuration.
    pub fn build_problem(&self) -> Result<Problem> {
        let h = build_hierarchy(self.levels, self.coarse_n, self.grading, self.coords)?;
        Ok(Problem::manufactured(h, self.aniso))
    }

    pub fn finest_size(&self) -> (usize, usize) {
        (
            level_size(self.coarse_n.0, self.levels),
            level_size(self.coarse_n.1, self.levels),
        )
    }

    fn start_strategy(&self) -> Result<StartVectorStrategy> {
        Ok(match self.start {
            StartChoice::Zero => StartVectorStrategy::Zero,
            StartChoice::Nested => StartVectorStrategy::Nested,
            StartChoice::Continuation => {
                let mut source = self.clone();
                source.start = StartChoice::Zero;
                source.aniso.alpha /= CONTINUATION_STEP;
                let report = source.solve()?;
                StartVectorStrategy::Continuation {
                    source: report.solution,
                }
            }
        })
    }

    pub fn solve(&self) -> Result<SolveReport> {
        let problem = self.build_problem()?;
        let strategy = self.start_strategy()?;
        crate::mgcycle::solve(&problem, self.cycle, &strategy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Values are `alpha / beta` ratios.
    Anisotropy,
    /// Values are level counts; the finest grid is held fixed.
    Levels,
    /// Values set `pre_steps = post_steps`.
    SmoothingSteps,
    Coordinates,
    Smoother,
    StartVector,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 6] = [
        SweepAxis::Anisotropy,
        SweepAxis::Levels,
        SweepAxis::SmoothingSteps,
        SweepAxis::Coordinates,
        SweepAxis::Smoother,
        SweepAxis::StartVector,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Anisotropy => "anisotropy",
            SweepAxis::Levels => "levels",
            SweepAxis::SmoothingSteps => "smoothing_steps",
            SweepAxis::Coordinates => "coordinates",
            SweepAxis::Smoother => "smoother",
            SweepAxis::StartVector => "start_vector",
        }
    }

    /// The configuration for one sweep value.
    pub fn apply(self, base: &SolverConfig, value: &str) -> Result<SolverConfig> {
        let mut cfg = base.clone();
        let value = value.trim();
        match self {
            SweepAxis::Anisotropy => {
                let ratio: f64 = parse_num("values", value)?;
                cfg.aniso = AnisotropySpec::new(ratio * base.aniso.beta, base.aniso.beta)?;
            }
            SweepAxis::Levels => {
                let levels: usize = parse_num("values", value)?;
                let (fx, fy) = base.finest_size();
                cfg.levels = levels;
                cfg.coarse_n = (
                    coarse_for("values", fx, levels)?,
                    coarse_for("values", fy, levels)?,
                );
            }
            SweepAxis::SmoothingSteps => {
                let steps: usize = parse_num("values", value)?;
                if steps == 0 {
                    return Err(Error::invalid("values", "smoothing steps must be >= 1"));
                }
                cfg.cycle.pre_steps = steps;
                cfg.cycle.post_steps = steps;
            }
            SweepAxis::Coordinates => cfg.coords = value.parse()?,
            SweepAxis::Smoother => {
                cfg.cycle.smoother = SmootherSpec::with_default(value.parse()?);
            }
            SweepAxis::StartVector => cfg.start = value.parse()?,
        }
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        SweepAxis::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            Error::invalid(
                "sweep",
                format!("unknown sweep `{s}`, expected anisotropy|levels|smoothing_steps|coordinates|smoother|start_vector"),
            )
        })
    }
}

fn parse_num<T: FromStr>(key: &'static str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{s}` as a number")))
}

/// Coarsest interior size giving `fine` interior points after `levels - 1` refinements.
fn coarse_for(key: &'static str, fine: usize, levels: usize) -> Result<usize> {
    if levels < 1 {
        return Err(Error::invalid(key, "level count must be >= 1"));
    }
    let div = 1usize << (levels - 1);
    if !(fine + 1).is_multiple_of(div) || (fine + 1) / div < 2 {
        return Err(Error::invalid(
            key,
            format!("a {fine}-point axis cannot be coarsened over {levels} levels"),
        ));
    }
    Ok((fine + 1) / div - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub axis: SweepAxis,
    pub values: Vec<String>,
    pub base: SolverConfig,
    /// Study CSV path; history files go to the same directory.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub value: String,
    pub cycles: usize,
    pub final_rel_residual: f64,
    pub mean_rate: f64,
    pub converged: bool,
    pub wall_time: Duration,
    pub relative_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub axis: SweepAxis,
    pub rows: Vec<StudyRow>,
}

pub const STUDY_HEADER: &str = "sweep_value,cycles,final_rel_residual,mean_rate,converged,wall_ms";

impl StudyResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(STUDY_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.value,
                row.cycles,
                sci(row.final_rel_residual),
                sci(row.mean_rate),
                u8::from(row.converged),
                sci(row.wall_time.as_secs_f64() * 1e3),
            ));
        }
        out
    }

    pub fn row(&self, value: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.value == value)
    }
}

pub fn history_csv(relative_history: &[f64]) -> String {
    let mut out = String::from("cycle,residual\n");
    for (k, r) in relative_history.iter().enumerate() {
        out.push_str(&format!("{k},{}\n", sci(*r)));
    }
    out
}

/// `printf("%.9e")`.
pub fn sci(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.9e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Geometric-mean reduction per cycle, `(r_K / r_0)^(1/K)`. Zero anywhere in
/// the history gives 0; fewer than two entries also gives 0.
pub fn convergence_rate(history: &[f64]) -> f64 {
    if history.len() < 2 || history.contains(&0.0) {
        return 0.0;
    }
    let k = (history.len() - 1) as f64;
    (history[history.len() - 1] / history[0]).powf(1.0 / k)
}

fn row_from_report(value: &str, report: &SolveReport, converged: bool, cycles: usize) -> StudyRow {
    let relative_history = report.relative_history();
    StudyRow {
        value: value.to_string(),
        cycles,
        final_rel_residual: report.final_relative_residual(),
        mean_rate: convergence_rate(&relative_history),
        converged,
        wall_time: report.wall_time,
        relative_history,
    }
}

pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    if config.values.is_empty() {
        return Err(Error::invalid("values", "at least one sweep value is required"));
    }
    // every value must describe a valid configuration before anything runs
    let configs = config
        .values
        .iter()
        .map(|v| config.axis.apply(&config.base, v).map(|c| (v.trim().to_string(), c)))
        .collect::<Result<Vec<_>>>()?;
    for (_, c) in &configs {
        c.cycle.validate()?;
        build_hierarchy(c.levels, c.coarse_n, c.grading, c.coords)?;
    }

    let mut rows = Vec::with_capacity(configs.len());
    for (value, cfg) in &configs {
        let row = match cfg.solve() {
            Ok(report) => row_from_report(value, &report, report.converged, report.iterations),
            Err(Error::Divergence { report }) => {
                row_from_report(value, &report, false, cfg.cycle.max_cycles)
            }
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    let result = StudyResult {
        axis: config.axis,
        rows,
    };
    if let Some(path) = &config.output {
        write_study(&result, path)?;
    }
    Ok(result)
}

pub fn write_study(result: &StudyResult, path: &Path) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, result.to_csv())?;
    for row in &result.rows {
        let name = format!("history_{}.csv", row.value);
        let target = match dir {
            Some(d) => d.join(name),
            None => PathBuf::from(name),
        };
        fs::write(target, history_csv(&row.relative_history))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        assert!((convergence_rate(&[1.0, 0.1, 0.01]) - 0.1).abs() < 1e-15);
        assert_eq!(convergence_rate(&[1.0, 1.0]), 1.0);
        assert_eq!(convergence_rate(&[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(convergence_rate(&[1.0]), 0.0);
    }

    #[test]
    fn c_style_scientific() {
        assert_eq!(sci(4.48421430e-01), "4.484214300e-01");
        assert_eq!(sci(0.0), "0.000000000e+00");
        assert_eq!(sci(12345.0), "1.234500000e+04");
        assert_eq!(sci(-2.5e-120), "-2.500000000e-120");
    }

    #[test]
    fn levels_sweep_keeps_finest_grid() {
        let base = SolverConfig {
            levels: 6,
            coarse_n: (1, 1),
            ..SolverConfig::default()
        };
        for (l, n0) in [(2, 31), (3, 15), (4, 7), (5, 3), (6, 1)] {
            let cfg = SweepAxis::Levels.apply(&base, &l.to_string()).unwrap();
            assert_eq!(cfg.coarse_n, (n0, n0));
            assert_eq!(cfg.finest_size(), (63, 63));
        }
        assert!(SweepAxis::Levels.apply(&base, "7").is_err());
    }

    #[test]
    fn continuation_shape_must_match() {
        let cfg = SolverConfig::default();
        let p = cfg.build_problem().unwrap();
        let solver = MultigridSolver::new(&p, cfg.cycle).unwrap();
        let small = build_hierarchy(2, (1, 1), GradingSpec::uniform(), CoordinateSystem::Cartesian).unwrap();
        let bad = StartVectorStrategy::Continuation {
            source: GridFunction::zeros(small.finest()),
        };
        assert!(make_start_vector(&bad, &solver).is_err());
        let zero = make_start_vector(&StartVectorStrategy::Zero, &solver).unwrap();
        assert_eq!(zero.norm2(), 0.0);
    }

    #[test]
    fn sweep_axis_parsing() {
        for a in SweepAxis::ALL {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        let err = "grids".parse::<SweepAxis>().unwrap_err();
        assert!(err.to_string().contains("sweep"));
    }
}
