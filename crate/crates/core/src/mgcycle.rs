//! The recursive multigrid cycle and the outer iteration around it.
//!
//! One visit of level `l > 1`: `m` pre-smoothing steps, restriction of the
//! defect, `p` recursive coarse visits starting from zero, correction
//! `u += omega_l * P u_c`, then `n` post-smoothing steps. Level 1 is solved
//! directly. V uses `p = 1`, W `p = 2`, F one F-visit followed by one V-visit
//! of the coarser level. When the coarser level is level 1 a single direct
//! solve replaces all of them, so every cycle type coincides on two levels.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::direct::DirectSolver;
use crate::error::{Error, Result};
use crate::operator::{GridFunction, StencilOperator};
use crate::problem::Problem;
use crate::smoother::{SmootherSpec, SmootherState};
use crate::study::{make_start_vector, StartVectorStrategy};
use crate::transfer::Transfer;

/// Residual growth (relative to the reference norm) treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CycleKind {
    V,
    W,
    F,
}

impl fmt::Display for CycleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CycleKind::V => "V",
            CycleKind::W => "W",
            CycleKind::F => "F",
        })
    }
}

impl FromStr for CycleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "V" | "v" => Ok(CycleKind::V),
            "W" | "w" => Ok(CycleKind::W),
            "F" | "f" => Ok(CycleKind::F),
            other => Err(Error::invalid("cycle", format!("expected V|W|F, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectionOmega {
    Fixed(f64),
    /// Energy-norm minimizing step along the prolonged correction.
    Adaptive,
}

impl Default for CorrectionOmega {
    fn default() -> Self {
        CorrectionOmega::Fixed(1.0)
    }
}

impl FromStr for CorrectionOmega {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "adaptive" {
            return Ok(CorrectionOmega::Adaptive);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(CorrectionOmega::Fixed(v)),
            _ => Err(Error::invalid(
                "correction_omega",
                format!("expected a positive number or `adaptive`, got `{s}`"),
            )),
        }
    }
}

impl fmt::Display for CorrectionOmega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrectionOmega::Fixed(v) => write!(f, "{v}"),
            CorrectionOmega::Adaptive => f.write_str("adaptive"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSpec {
    pub cycle: CycleKind,
    pub pre_steps: usize,
    pub post_steps: usize,
    pub correction_omega: CorrectionOmega,
    pub smoother: SmootherSpec,
    /// Outer Richardson damping used by every smoothing step.
    pub smoothing_omega: f64,
    /// Target for `||b - A u|| / ||b||`.
    pub tolerance: f64,
    pub max_cycles: usize,
}

impl CycleSpec {
    pub fn new(smoother: SmootherSpec) -> Self {
        CycleSpec {
            cycle: CycleKind::F,
            pre_steps: 1,
            post_steps: 1,
            correction_omega: CorrectionOmega::default(),
            smoother,
            smoothing_omega: 0.7,
            tolerance: 1e-4,
            max_cycles: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pre_steps + self.post_steps < 1 {
            return Err(Error::invalid("pre_steps", "pre_steps + post_steps must be >= 1"));
        }
        if !(self.smoothing_omega.is_finite() && self.smoothing_omega > 0.0) {
            return Err(Error::invalid("omega", format!("must be > 0, got {}", self.smoothing_omega)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::invalid("tol", format!("must be > 0, got {}", self.tolerance)));
        }
        if let CorrectionOmega::Fixed(w) = self.correction_omega {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid("correction_omega", format!("must be > 0, got {w}")));
            }
        }
        SmootherSpec::new(self.smoother.kind, self.smoother.omega)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||b - A u_k||_2` for `k = 0..=iterations`.
    pub residual_history: Vec<f64>,
    pub convergence_factors: Vec<f64>,
    pub converged: bool,
    pub wall_time: Duration,
    /// Norm the tolerance is measured against: `||b||`, or the initial
    /// residual when `b = 0`.
    pub reference_norm: f64,
    pub solution: GridFunction,
}

impl SolveReport {
    pub fn final_relative_residual(&self) -> f64 {
        let last = *self.residual_history.last().expect("history is never empty");
        if self.reference_norm > 0.0 {
            last / self.reference_norm
        } else {
            last
        }
    }

    pub fn relative_history(&self) -> Vec<f64> {
        let r = if self.reference_norm > 0.0 { self.reference_norm } else { 1.0 };
        self.residual_history.iter().map(|v| v / r).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visit {
    Pre,
    Solve,
    Post,
}

/// Snapshot taken while tracing a cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum CycleEvent {
    PreSmoothed { level: usize, u: GridFunction },
    Defect { level: usize, d: GridFunction },
    Restricted { level: usize, g: GridFunction },
    Solved { level: usize, u: GridFunction },
    Prolonged { level: usize, correction: GridFunction },
    Corrected { level: usize, omega: f64, u: GridFunction },
    PostSmoothed { level: usize, u: GridFunction },
}

impl CycleEvent {
    /// The schedule entry this event marks, if any.
    pub fn visit(&self) -> Option<(usize, Visit)> {
        match self {
            CycleEvent::PreSmoothed { level, .. } => Some((*level, Visit::Pre)),
            CycleEvent::Solved { level, .. } => Some((*level, Visit::Solve)),
            CycleEvent::PostSmoothed { level, .. } => Some((*level, Visit::Post)),
            _ => None,
        }
    }
}

/// Level visits of one cycle of `kind` started on level `levels`.
pub fn cycle_schedule(levels: usize, kind: CycleKind) -> Vec<(usize, Visit)> {
    fn visit(level: usize, kind: CycleKind, out: &mut Vec<(usize, Visit)>) {
        if level == 1 {
            out.push((1, Visit::Solve));
            return;
        }
        out.push((level, Visit::Pre));
        if level == 2 {
            visit(1, kind, out);
        } else {
            match kind {
                CycleKind::V => visit(level - 1, CycleKind::V, out),
                CycleKind::W => {
                    visit(level - 1, CycleKind::W, out);
                    visit(level - 1, CycleKind::W, out);
                }
                CycleKind::F => {
                    visit(level - 1, CycleKind::F, out);
                    visit(level - 1, CycleKind::V, out);
                }
            }
        }
        out.push((level, Visit::Post));
    }
    let mut out = Vec::new();
    if levels >= 1 {
        visit(levels, kind, &mut out);
    }
    out
}

pub fn fcycle_schedule(levels: usize) -> Vec<(usize, Visit)> {
    cycle_schedule(levels, CycleKind::F)
}

/// `(d, c) / (A c, c)`: the step along `c` minimizing the energy norm of the
/// error whose defect is `d`. Returns 1 for a zero correction.
pub fn adaptive_omega(d: &GridFunction, correction: &GridFunction, op: &StencilOperator) -> Result<f64> {
    if correction.values.iter().all(|&v| v == 0.0) {
        return Ok(1.0);
    }
    let num = d.dot(correction);
    let den = op.energy(correction, correction);
    if !(den > 0.0) || !num.is_finite() {
        return Err(Error::Internal(format!(
            "non-positive energy {den} for a nonzero correction"
        )));
    }
    Ok(num / den)
}

/// Smoothers, transfers and the coarse factorization for one problem.
#[derive(Debug, Clone)]
pub struct MultigridSolver<'a> {
    problem: &'a Problem,
    spec: CycleSpec,
    /// Indexed by `level - 1`; `None` on level 1 of a multilevel hierarchy.
    smoothers: Vec<Option<SmootherState>>,
    /// `transfers[l - 2]` links level `l - 1` and `l`.
    transfers: Vec<Transfer>,
    coarse: DirectSolver,
}

impl<'a> MultigridSolver<'a> {
    pub fn new(problem: &'a Problem, spec: CycleSpec) -> Result<Self> {
        spec.validate()?;
        let levels = problem.num_levels();
        let smoothers = (1..=levels)
            .map(|l| {
                if l == 1 && levels > 1 {
                    Ok(None)
                } else {
                    SmootherState::setup(spec.smoother, problem.operator(l).clone()).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let transfers = (2..=levels)
            .map(|l| Transfer::new(problem.hierarchy.level(l - 1), problem.hierarchy.level(l)))
            .collect();
        let coarse = DirectSolver::new(problem.operator(1))?;
        Ok(MultigridSolver {
            problem,
            spec,
            smoothers,
            transfers,
            coarse,
        })
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn spec(&self) -> &CycleSpec {
        &self.spec
    }

    pub fn smoother(&self, level: usize) -> Option<&SmootherState> {
        self.smoothers[level - 1].as_ref()
    }

    pub fn transfer(&self, fine_level: usize) -> &Transfer {
        &self.transfers[fine_level - 2]
    }

    pub fn coarse_solve(&self, g: &GridFunction) -> GridFunction {
        self.coarse.solve(g)
    }

    /// One cycle of the configured kind on `level`.
    pub fn mg_cycle(&self, level: usize, u0: GridFunction, g: &GridFunction) -> Result<GridFunction> {
        self.visit(level, u0, g, self.spec.cycle, &mut None)
    }

    /// Like [`Self::mg_cycle`], recording every substep.
    pub fn mg_cycle_traced(
        &self,
        level: usize,
        u0: GridFunction,
        g: &GridFunction,
        trace: &mut Vec<CycleEvent>,
    ) -> Result<GridFunction> {
        self.visit(level, u0, g, self.spec.cycle, &mut Some(trace))
    }

    fn visit(
        &self,
        level: usize,
        mut u: GridFunction,
        g: &GridFunction,
        kind: CycleKind,
        trace: &mut Option<&mut Vec<CycleEvent>>,
    ) -> Result<GridFunction> {
        let record = |trace: &mut Option<&mut Vec<CycleEvent>>, ev: CycleEvent| {
            if let Some(t) = trace.as_deref_mut() {
                t.push(ev);
            }
        };
        if level == 1 {
            let u = self.coarse.solve(g);
            record(trace, CycleEvent::Solved { level, u: u.clone() });
            return Ok(u);
        }

        let op = self.problem.operator(level);
        let smoother = self.smoothers[level - 1]
            .as_ref()
            .expect("smoother exists above level 1");
        let omega = self.spec.smoothing_omega;
        for _ in 0..self.spec.pre_steps {
            smoother.smooth_in_place(&mut u, g, omega);
        }
        record(trace, CycleEvent::PreSmoothed { level, u: u.clone() });

        let d = op.residual(&u, g);
        record(trace, CycleEvent::Defect { level, d: d.clone() });
        let transfer = &self.transfers[level - 2];
        let gc = transfer.restrict(&d);
        record(trace, CycleEvent::Restricted { level: level - 1, g: gc.clone() });

        let mut uc = GridFunction::zeros(self.problem.hierarchy.level(level - 1));
        if level == 2 {
            uc = self.visit(1, uc, &gc, kind, trace)?;
        } else {
            match kind {
                CycleKind::V => uc = self.visit(level - 1, uc, &gc, CycleKind::V, trace)?,
                CycleKind::W => {
                    for _ in 0..2 {
                        uc = self.visit(level - 1, uc, &gc, CycleKind::W, trace)?;
                    }
                }
                CycleKind::F => {
                    uc = self.visit(level - 1, uc, &gc, CycleKind::F, trace)?;
                    uc = self.visit(level - 1, uc, &gc, CycleKind::V, trace)?;
                }
            }
        }

        let correction = transfer.prolong(&uc);
        record(trace, CycleEvent::Prolonged { level, correction: correction.clone() });
        let omega_l = match self.spec.correction_omega {
            CorrectionOmega::Fixed(w) => w,
            CorrectionOmega::Adaptive => adaptive_omega(&d, &correction, op)?,
        };
        u.axpy(omega_l, &correction);
        record(trace, CycleEvent::Corrected { level, omega: omega_l, u: u.clone() });

        for _ in 0..self.spec.post_steps {
            smoother.smooth_in_place(&mut u, g, omega);
        }
        record(trace, CycleEvent::PostSmoothed { level, u: u.clone() });
        Ok(u)
    }

    /// Direct solve on level 1, then prolongate and smooth once per level.
    pub fn nested_start(&self) -> GridFunction {
        let levels = self.problem.num_levels();
        let mut rhs = vec![self.problem.rhs.clone()];
        for l in (2..=levels).rev() {
            let next = self.transfers[l - 2].restrict(rhs.last().expect("nonempty"));
            rhs.push(next);
        }
        rhs.reverse();
        let mut u = self.coarse.solve(&rhs[0]);
        for l in 2..=levels {
            u = self.transfers[l - 2].prolong(&u);
            let smoother = self.smoothers[l - 1].as_ref().expect("smoother above level 1");
            smoother.smooth_in_place(&mut u, &rhs[l - 1], self.spec.smoothing_omega);
        }
        u
    }

    /// Outer cycles from `start` until the relative residual meets the tolerance.
    pub fn solve_from(&self, start: GridFunction) -> Result<SolveReport> {
        let timer = Instant::now();
        let op = self.problem.finest_operator();
        let b = &self.problem.rhs;
        let levels = self.problem.num_levels();
        let mut u = start;
        let r0 = op.residual(&u, b).norm2();
        let b_norm = b.norm2();
        let reference = if b_norm > 0.0 { b_norm } else { r0 };
        let mut history = vec![r0];
        let reached = |r: f64| r == 0.0 || (reference > 0.0 && r / reference <= self.spec.tolerance);
        let mut converged = reached(r0);

        let report = |history: Vec<f64>, converged: bool, solution: GridFunction| {
            let convergence_factors = history
                .windows(2)
                .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
                .collect();
            SolveReport {
                iterations: history.len() - 1,
                residual_history: history,
                convergence_factors,
                converged,
                wall_time: timer.elapsed(),
                reference_norm: reference,
                solution,
            }
        };

        while !converged && history.len() <= self.spec.max_cycles {
            u = self.mg_cycle(levels, u, b)?;
            let r = op.residual(&u, b).norm2();
            history.push(r);
            if !r.is_finite() || r > DIVERGENCE_FACTOR * reference.max(r0) {
                return Err(Error::Divergence {
                    report: Box::new(report(history, false, u)),
                });
            }
            converged = reached(r);
        }
        Ok(report(history, converged, u))
    }
}

/// Builds the solver, the start vector and runs the outer iteration.
pub fn solve(problem: &Problem, spec: CycleSpec, start: &StartVectorStrategy) -> Result<SolveReport> {
    let solver = MultigridSolver::new(problem, spec)?;
    let u0 = make_start_vector(start, &solver)?;
    solver.solve_from(u0)
}
