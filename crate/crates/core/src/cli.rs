//! Command-line front end: `solve`, `study` and `probe`.
//!
//! Configuration comes from an optional `key = value` file (`--config`) and
//! from `--key value` flags; flags win. Unknown keys are rejected.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 `solve` hit
//! `max_cycles`, 3 `solve` diverged, 4 `probe` found no contraction.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Arg, ArgMatches, Command};

use crate::error::{Error, Result};
use crate::mesh::{build_hierarchy, CoordinateSystem, GradingSpec};
use crate::mgcycle::{CorrectionOmega, CycleKind};
use crate::operator::{AnisotropySpec, StencilOperator};
use crate::smoother::{SmootherKind, SmootherSpec, SmootherState};
use crate::study::{
    convergence_rate, history_csv, run_study, sci, SolverConfig, StartChoice, StudyConfig, SweepAxis,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MAX_CYCLES: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_NO_CONTRACTION: i32 = 4;

/// `(key, value name, help including the admissible range)`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("levels", "INT", "number of grid levels, 1..=16 [default: 4]"),
    ("coarse_n", "NX[,NY]", "interior points per direction on the coarsest level, each >= 1 [default: 1,1]"),
    ("grading_x", "REAL", "ratio of adjacent cell widths along x, > 0 [default: 1]"),
    ("grading_y", "REAL", "ratio of adjacent cell widths along y, > 0 [default: 1]"),
    ("coords", "NAME", "cartesian | cylindrical | spherical [default: cartesian]"),
    ("alpha", "REAL", "x-direction diffusion coefficient, > 0 [default: 1]"),
    ("beta", "REAL", "y-direction diffusion coefficient, > 0 [default: 1]"),
    ("smoother", "NAME", "richardson | jacobi | gauss_seidel | sor | ilu0 | tri_x | tri_y | adi | gstri_x | gstri_y | gsadi [default: gsadi]"),
    ("omega", "REAL", "outer Richardson damping of each smoothing step, > 0 [default: 0.7]"),
    ("smoother_omega", "REAL", "parameter inside C: sor and gauss_seidel in (0,2); tri_*, adi, gstri_*, gsadi in (0,1]; richardson, jacobi, ilu0 > 0 (richardson is clamped to 0.9/lambda_max) [default: 1, sor 1.5]"),
    ("cycle", "V|W|F", "multigrid cycle [default: F]"),
    ("pre_steps", "INT", "pre-smoothing steps, >= 0, pre_steps + post_steps >= 1 [default: 1]"),
    ("post_steps", "INT", "post-smoothing steps, >= 0 [default: 1]"),
    ("correction_omega", "REAL|adaptive", "coarse-grid correction weight, > 0, or `adaptive` [default: 1]"),
    ("tol", "REAL", "relative residual target ||b - Au|| / ||b||, > 0 [default: 1e-4]"),
    ("max_cycles", "INT", "cycle budget, >= 1 [default: 50; 1 for `study --sweep levels`]"),
    ("start", "NAME", "zero | nested | continuation (starts from the solution with alpha/10) [default: zero]"),
    ("sweep", "AXIS", "study axis: anisotropy (values are alpha/beta) | levels (finest grid fixed) | smoothing_steps | coordinates | smoother | start_vector"),
    ("values", "LIST", "comma-separated sweep values"),
    ("out", "PATH", "solve: residual history CSV; study: study CSV (history_<value>.csv files go next to it) [default for study: study_<sweep>.csv]"),
];

pub fn command() -> Command {
    let keyed = |name: &'static str, about: &'static str| {
        let mut cmd = Command::new(name).about(about);
        for &(key, value_name, help) in KEYS {
            cmd = cmd.arg(Arg::new(key).long(key).value_name(value_name).help(help));
        }
        cmd.arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("flat `key = value` file with `#` comments; flags override it"),
        )
    };
    Command::new("anisomg")
        .about("Geometric multigrid for anisotropic Poisson problems on graded grids")
        .subcommand_required(true)
        .subcommand(keyed("solve", "Run one multigrid solve and print the residual history"))
        .subcommand(keyed("study", "Run a parameter sweep and write CSV tables"))
        .subcommand(keyed("probe", "Estimate the smoother contraction on the finest level"))
}

/// Parsed, range-checked configuration plus the keys given explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub sweep: Option<SweepAxis>,
    pub values: Vec<String>,
    pub out: Option<PathBuf>,
    pub explicit: BTreeSet<String>,
}

/// Reads `key = value` lines.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::invalid("config", format!("line {}: expected `key = value`", lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn key_static(key: &str) -> Option<&'static str> {
    KEYS.iter().map(|k| k.0).find(|k| *k == key)
}

fn num<T: FromStr>(key: &'static str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{v}`")))
}

fn positive(key: &'static str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::invalid(key, format!("must be > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        for key in map.keys() {
            if key_static(key).is_none() {
                return Err(Error::InvalidArgument {
                    key: "config",
                    msg: format!("unknown key `{key}`"),
                });
            }
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let mut cfg = SolverConfig::default();

        if let Some(v) = get("levels") {
            let levels: usize = num("levels", v)?;
            if !(1..=16).contains(&levels) {
                return Err(Error::invalid("levels", format!("must be in 1..=16, got {levels}")));
            }
            cfg.levels = levels;
        }
        if let Some(v) = get("coarse_n") {
            let parts: Vec<&str> = v.split(',').collect();
            let (a, b) = match parts.as_slice() {
                [a] => (num::<usize>("coarse_n", a)?, num::<usize>("coarse_n", a)?),
                [a, b] => (num("coarse_n", a)?, num("coarse_n", b)?),
                _ => return Err(Error::invalid("coarse_n", "expected NX or NX,NY")),
            };
            if a < 1 || b < 1 {
                return Err(Error::invalid("coarse_n", "each entry must be >= 1"));
            }
            cfg.coarse_n = (a, b);
        }
        let gx = get("grading_x").map(|v| positive("grading_x", v)).transpose()?.unwrap_or(1.0);
        let gy = get("grading_y").map(|v| positive("grading_y", v)).transpose()?.unwrap_or(1.0);
        cfg.grading = GradingSpec::new(gx, gy)?;
        if let Some(v) = get("coords") {
            cfg.coords = v.parse::<CoordinateSystem>()?;
        }
        let alpha = get("alpha").map(|v| positive("alpha", v)).transpose()?.unwrap_or(1.0);
        let beta = get("beta").map(|v| positive("beta", v)).transpose()?.unwrap_or(1.0);
        cfg.aniso = AnisotropySpec::new(alpha, beta)?;

        let kind = match get("smoother") {
            Some(v) => v.parse::<SmootherKind>()?,
            None => cfg.cycle.smoother.kind,
        };
        let smoother_omega = match get("smoother_omega") {
            Some(v) => num("smoother_omega", v)?,
            None => kind.default_omega(),
        };
        cfg.cycle.smoother = SmootherSpec::new(kind, smoother_omega)?;
        if let Some(v) = get("omega") {
            cfg.cycle.smoothing_omega = positive("omega", v)?;
        }
        if let Some(v) = get("cycle") {
            cfg.cycle.cycle = v.parse::<CycleKind>()?;
        }
        if let Some(v) = get("pre_steps") {
            cfg.cycle.pre_steps = num("pre_steps", v)?;
        }
        if let Some(v) = get("post_steps") {
            cfg.cycle.post_steps = num("post_steps", v)?;
        }
        if let Some(v) = get("correction_omega") {
            cfg.cycle.correction_omega = v.parse::<CorrectionOmega>()?;
        }
        if let Some(v) = get("tol") {
            cfg.cycle.tolerance = positive("tol", v)?;
        }
        if let Some(v) = get("max_cycles") {
            let m: usize = num("max_cycles", v)?;
            if m < 1 {
                return Err(Error::invalid("max_cycles", "must be >= 1"));
            }
            cfg.cycle.max_cycles = m;
        }
        if let Some(v) = get("start") {
            cfg.start = v.parse::<StartChoice>()?;
        }
        cfg.cycle.validate()?;

        let sweep = get("sweep").map(str::parse::<SweepAxis>).transpose()?;
        let values = get("values")
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default();

        Ok(RunConfig {
            solver: cfg,
            sweep,
            values,
            out: get("out").map(PathBuf::from),
            explicit: map.keys().cloned().collect(),
        })
    }

    fn given(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Study configuration with the sweep-specific defaults filled in.
    pub fn study_config(&self) -> Result<StudyConfig> {
        let axis = self
            .sweep
            .ok_or_else(|| Error::invalid("sweep", "`study` requires --sweep"))?;
        if self.values.is_empty() {
            return Err(Error::invalid("values", "`study` requires --values"));
        }
        let mut base = self.solver.clone();
        if axis == SweepAxis::Levels {
            if !self.given("max_cycles") {
                base.cycle.max_cycles = 1;
            }
            if !self.given("levels") && !self.given("coarse_n") {
                let deepest = self
                    .values
                    .iter()
                    .map(|v| num::<usize>("values", v))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .max()
                    .unwrap_or(1);
                base.levels = deepest;
                base.coarse_n = (1, 1);
            }
        }
        let out = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("study_{}.csv", axis.name())));
        Ok(StudyConfig {
            axis,
            values: self.values.clone(),
            base,
            output: Some(out),
        })
    }
}

/// Merges the config file named by `--config` with the explicit flags.
fn collect_keys(m: &ArgMatches) -> Result<BTreeMap<String, String>> {
    let mut map = match m.get_one::<String>("config") {
        Some(path) => parse_config_text(&fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    for &(key, _, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            map.insert(key.to_string(), v.clone());
        }
    }
    Ok(map)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let config = match collect_keys(sub).and_then(|m| RunConfig::from_map(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = match name {
        "solve" => cmd_solve(&config, out, err),
        "study" => cmd_study(&config, out),
        "probe" => cmd_probe(&config, out, err),
        _ => unreachable!("clap only accepts known subcommands"),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_CONFIG
        }
    }
}

pub fn cmd_solve(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = &config.solver;
    let (report, diverged) = match cfg.solve() {
        Ok(r) => (r, false),
        Err(Error::Divergence { report }) => (*report, true),
        Err(e) => return Err(e),
    };
    let rel = report.relative_history();
    for (k, r) in rel.iter().enumerate() {
        let rate = if k == 0 { "-".to_string() } else { sci(report.convergence_factors[k - 1]) };
        writeln!(out, "cycle {k} residual {} rate {rate}", sci(*r))?;
    }
    writeln!(
        out,
        "summary converged {} cycles {} final_rel_residual {} mean_rate {} wall_ms {}",
        report.converged,
        report.iterations,
        sci(report.final_relative_residual()),
        sci(convergence_rate(&rel)),
        sci(report.wall_time.as_secs_f64() * 1e3)
    )?;
    if let Some(path) = &config.out {
        fs::write(path, history_csv(&rel))?;
    }
    Ok(if report.converged {
        EXIT_OK
    } else if diverged {
        let _ = writeln!(err, "diverged after {} cycles", report.iterations);
        EXIT_DIVERGED
    } else {
        EXIT_MAX_CYCLES
    })
}

pub fn cmd_study(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let study = config.study_config()?;
    let result = run_study(&study)?;
    write!(out, "{}", result.to_csv())?;
    if let Some(path) = &study.output {
        writeln!(out, "# wrote {}", path.display())?;
    }
    Ok(EXIT_OK)
}

/// Power-iteration budget for a probe on an `n`-point axis.
pub fn probe_iterations(n: usize) -> usize {
    (4 * (n + 1) * (n + 1)).clamp(100, 5000)
}

pub fn cmd_probe(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = &config.solver;
    let h = build_hierarchy(cfg.levels, cfg.coarse_n, cfg.grading, cfg.coords)?;
    let grid = h.finest().clone();
    let op = Arc::new(StencilOperator::assemble(grid.clone(), cfg.aniso));
    let state = SmootherState::setup(cfg.cycle.smoother, op)?;
    if let Some(requested) = state.clamped_from() {
        writeln!(
            err,
            "warning: smoother_omega {requested} exceeds 1/lambda_max = {}; clamped to {}",
            sci(1.0 / state.lambda_max().unwrap_or(f64::NAN)),
            sci(state.spec().omega)
        )?;
    }
    let iterations = probe_iterations(grid.nx.max(grid.ny));
    let rho = state.estimate_contraction(cfg.cycle.smoothing_omega, iterations);
    writeln!(
        out,
        "smoother {} grid {}x{} omega {} smoother_omega {} iterations {iterations} contraction {}",
        state.spec().kind,
        grid.nx,
        grid.ny,
        cfg.cycle.smoothing_omega,
        state.spec().omega,
        sci(rho)
    )?;
    Ok(if rho < 1.0 { EXIT_OK } else { EXIT_NO_CONTRACTION })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn config_text_with_comments() {
        let m = parse_config_text("# model\nlevels = 3\n\nsmoother = adi # lines\n").unwrap();
        assert_eq!(m, map(&[("levels", "3"), ("smoother", "adi")]));
        assert!(parse_config_text("levels 3").is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let e = RunConfig::from_map(&map(&[("level", "3")])).unwrap_err();
        assert!(e.to_string().contains("level"));
    }

    #[test]
    fn range_errors_name_the_key() {
        for (k, v) in [
            ("levels", "0"),
            ("coarse_n", "0,2"),
            ("grading_x", "-1"),
            ("alpha", "0"),
            ("omega", "nan"),
            ("smoother_omega", "5"),
            ("tol", "0"),
            ("max_cycles", "0"),
            ("cycle", "Z"),
            ("start", "warm"),
            ("coords", "polar"),
        ] {
            let e = RunConfig::from_map(&map(&[(k, v)])).unwrap_err();
            assert!(e.to_string().contains(k), "{k}: {e}");
        }
    }

    #[test]
    fn defaults() {
        let c = RunConfig::from_map(&BTreeMap::new()).unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.solver.cycle.smoothing_omega, 0.7);
        assert_eq!(c.solver.cycle.tolerance, 1e-4);
        assert_eq!(c.solver.cycle.cycle, CycleKind::F);
    }

    #[test]
    fn levels_study_defaults() {
        let c = RunConfig::from_map(&map(&[("sweep", "levels"), ("values", "2,3,4,5,6")])).unwrap();
        let s = c.study_config().unwrap();
        assert_eq!(s.base.cycle.max_cycles, 1);
        assert_eq!(s.base.finest_size(), (63, 63));
    }

    #[test]
    fn help_lists_every_key() {
        let mut cmd = command();
        let help = cmd
            .find_subcommand_mut("solve")
            .unwrap()
            .render_long_help()
            .to_string();
        for &(k, _, _) in KEYS {
            assert!(help.contains(&format!("--{k}")), "{k}");
        }
        assert!(help.contains("--config"));
    }
}
