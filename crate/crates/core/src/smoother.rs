//! Preconditioned Richardson smoothing `x <- x - omega * C^{-1} (A x - b)`.
//!
//! Two parameters are involved and kept apart:
//!
//! * the outer damping `omega` passed to [`SmootherState::smooth_step`];
//! * the construction parameter [`SmootherSpec::omega`] that enters `C`:
//!   SOR uses `C = D + omega L`, the line methods use `C = omega (D + line couplings)`
//!   and Richardson uses `C^{-1} = omega I` (clamped against the largest eigenvalue).
//!   Jacobi, Gauss-Seidel and ILU(0) only range-check it.
//!
//! Line preconditioners along `y` never copy or transpose data; they run the
//! same Thomas sweeps with the strides switched.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::{GridFunction, StencilOperator};

const POWER_SEED: u64 = 0x5eed_0fc0_ffee;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SmootherKind {
    Richardson,
    Jacobi,
    GaussSeidel,
    Sor,
    Ilu0,
    TriX,
    TriY,
    Adi,
    GsTriX,
    GsTriY,
    GsAdi,
}

impl SmootherKind {
    pub const ALL: [SmootherKind; 11] = [
        SmootherKind::Richardson,
        SmootherKind::Jacobi,
        SmootherKind::GaussSeidel,
        SmootherKind::Sor,
        SmootherKind::Ilu0,
        SmootherKind::TriX,
        SmootherKind::TriY,
        SmootherKind::Adi,
        SmootherKind::GsTriX,
        SmootherKind::GsTriY,
        SmootherKind::GsAdi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SmootherKind::Richardson => "richardson",
            SmootherKind::Jacobi => "jacobi",
            SmootherKind::GaussSeidel => "gauss_seidel",
            SmootherKind::Sor => "sor",
            SmootherKind::Ilu0 => "ilu0",
            SmootherKind::TriX => "tri_x",
            SmootherKind::TriY => "tri_y",
            SmootherKind::Adi => "adi",
            SmootherKind::GsTriX => "gstri_x",
            SmootherKind::GsTriY => "gstri_y",
            SmootherKind::GsAdi => "gsadi",
        }
    }

    /// Default construction parameter.
    pub fn default_omega(self) -> f64 {
        match self {
            SmootherKind::Sor => 1.5,
            _ => 1.0,
        }
    }

    fn check_omega(self, omega: f64) -> Result<()> {
        let ok = omega.is_finite()
            && match self {
                SmootherKind::Richardson | SmootherKind::Jacobi | SmootherKind::Ilu0 => omega > 0.0,
                SmootherKind::GaussSeidel | SmootherKind::Sor => omega > 0.0 && omega < 2.0,
                _ => omega > 0.0 && omega <= 1.0,
            };
        if ok {
            Ok(())
        } else {
            let range = match self {
                SmootherKind::Richardson | SmootherKind::Jacobi | SmootherKind::Ilu0 => "> 0",
                SmootherKind::GaussSeidel | SmootherKind::Sor => "in (0, 2)",
                _ => "in (0, 1]",
            };
            Err(Error::invalid(
                "smoother_omega",
                format!("{} requires omega {range}, got {omega}", self.name()),
            ))
        }
    }
}

impl fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmootherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        SmootherKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SmootherKind::ALL.iter().map(|k| k.name()).collect();
                Error::invalid("smoother", format!("unknown smoother `{s}`, expected one of {}", names.join("|")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherSpec {
    pub kind: SmootherKind,
    pub omega: f64,
}

impl SmootherSpec {
    pub fn new(kind: SmootherKind, omega: f64) -> Result<Self> {
        kind.check_omega(omega)?;
        Ok(SmootherSpec { kind, omega })
    }

    pub fn with_default(kind: SmootherKind) -> Self {
        SmootherSpec {
            kind,
            omega: kind.default_omega(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    X,
    Y,
}

/// Thomas LU of every line along one axis: `3 * neq` reals.
#[derive(Debug, Clone)]
struct LineFactors {
    axis: Axis,
    lower: Vec<f64>,
    pivot: Vec<f64>,
    upper: Vec<f64>,
}

/// Geometry of the line family along `axis`.
#[derive(Debug, Clone, Copy)]
struct Lines {
    count: usize,
    len: usize,
    stride: usize,
    /// Offset from a line's start to the next line's start.
    step: usize,
}

impl Lines {
    fn new(op: &StencilOperator, axis: Axis) -> Self {
        let (nx, ny) = (op.nx(), op.ny());
        match axis {
            Axis::X => Lines {
                count: ny,
                len: nx,
                stride: 1,
                step: nx,
            },
            Axis::Y => Lines {
                count: nx,
                len: ny,
                stride: nx,
                step: 1,
            },
        }
    }
}

/// `(previous along line, next along line, previous line)` coupling arrays.
fn couplings(op: &StencilOperator, axis: Axis) -> (&[f64], &[f64], &[f64]) {
    match axis {
        Axis::X => (&op.w, &op.e, &op.s),
        Axis::Y => (&op.s, &op.n, &op.w),
    }
}

impl LineFactors {
    fn factor(op: &StencilOperator, axis: Axis, omega: f64) -> Result<Self> {
        let neq = op.neq();
        let lines = Lines::new(op, axis);
        let (prev, next, _) = couplings(op, axis);
        let mut lower = vec![0.0; neq];
        let mut pivot = vec![0.0; neq];
        let mut upper = vec![0.0; neq];
        for line in 0..lines.count {
            let start = line * lines.step;
            for t in 0..lines.len {
                let k = start + t * lines.stride;
                let diag = omega * op.c[k];
                upper[k] = if t + 1 < lines.len { omega * next[k] } else { 0.0 };
                if t == 0 {
                    pivot[k] = diag;
                } else {
                    let kp = k - lines.stride;
                    lower[k] = omega * prev[k] / pivot[kp];
                    pivot[k] = diag - lower[k] * upper[kp];
                }
                if !(pivot[k] > 0.0) {
                    return Err(Error::Factorization { row: k });
                }
            }
        }
        Ok(LineFactors {
            axis,
            lower,
            pivot,
            upper,
        })
    }

    fn len(&self) -> usize {
        self.lower.len() + self.pivot.len() + self.upper.len()
    }

    /// Solves one line in place.
    fn solve_line(&self, z: &mut [f64], start: usize, lines: Lines) {
        let s = lines.stride;
        let mut k = start;
        for _ in 1..lines.len {
            let kn = k + s;
            z[kn] -= self.lower[kn] * z[k];
            k = kn;
        }
        z[k] /= self.pivot[k];
        for _ in 1..lines.len {
            let kp = k - s;
            z[kp] = (z[kp] - self.upper[kp] * z[k]) / self.pivot[kp];
            k = kp;
        }
    }

    /// `z = C^{-1} r` for the line (or line-Gauss-Seidel) preconditioner.
    fn apply(&self, op: &StencilOperator, r: &[f64], z: &mut [f64], gs_omega: Option<f64>) {
        let lines = Lines::new(op, self.axis);
        let (_, _, transverse) = couplings(op, self.axis);
        z.copy_from_slice(r);
        for line in 0..lines.count {
            let start = line * lines.step;
            if let (Some(omega), true) = (gs_omega, line > 0) {
                for t in 0..lines.len {
                    let k = start + t * lines.stride;
                    z[k] -= omega * transverse[k] * z[k - lines.step];
                }
            }
            self.solve_line(z, start, lines);
        }
    }
}

/// Zero-fill incomplete LU on the five-point pattern: `5 * neq` reals.
#[derive(Debug, Clone)]
struct Ilu0 {
    lw: Vec<f64>,
    ls: Vec<f64>,
    d: Vec<f64>,
    ue: Vec<f64>,
    un: Vec<f64>,
}

impl Ilu0 {
    fn factor(op: &StencilOperator) -> Result<Self> {
        let (nx, ny) = (op.nx(), op.ny());
        let neq = op.neq();
        let mut f = Ilu0 {
            lw: vec![0.0; neq],
            ls: vec![0.0; neq],
            d: vec![0.0; neq],
            ue: vec![0.0; neq],
            un: vec![0.0; neq],
        };
        for k in 0..neq {
            let (i, j) = (k % nx, k / nx);
            if i + 1 < nx {
                f.ue[k] = op.e[k];
            }
            if j + 1 < ny {
                f.un[k] = op.n[k];
            }
            let mut d = op.c[k];
            if i > 0 {
                f.lw[k] = op.w[k] / f.d[k - 1];
                d -= f.lw[k] * f.ue[k - 1];
            }
            if j > 0 {
                f.ls[k] = op.s[k] / f.d[k - nx];
                d -= f.ls[k] * f.un[k - nx];
            }
            if !(d > 0.0) {
                return Err(Error::Factorization { row: k });
            }
            f.d[k] = d;
        }
        Ok(f)
    }

    fn len(&self) -> usize {
        5 * self.d.len()
    }

    fn apply(&self, nx: usize, r: &[f64], z: &mut [f64]) {
        let neq = r.len();
        for k in 0..neq {
            let mut v = r[k];
            if k % nx > 0 {
                v -= self.lw[k] * z[k - 1];
            }
            if k >= nx {
                v -= self.ls[k] * z[k - nx];
            }
            z[k] = v;
        }
        for k in (0..neq).rev() {
            let mut v = z[k];
            if k + 1 < neq {
                v -= self.ue[k] * z[k + 1];
            }
            if k + nx < neq {
                v -= self.un[k] * z[k + nx];
            }
            z[k] = v / self.d[k];
        }
    }
}

#[derive(Debug, Clone)]
enum Preconditioner {
    Richardson { scale: f64 },
    Jacobi,
    /// `C = D + omega L`, lexicographic forward substitution.
    ForwardSweep { omega: f64 },
    Ilu0(Ilu0),
    Line { lines: LineFactors, gs: bool },
    Adi { x: LineFactors, y: LineFactors, gs: bool },
}

/// Set-up smoother bound to one level operator. Immutable after [`SmootherState::setup`].
#[derive(Debug, Clone)]
pub struct SmootherState {
    spec: SmootherSpec,
    op: Arc<StencilOperator>,
    pre: Preconditioner,
    /// Requested Richardson parameter when it had to be reduced.
    clamped_from: Option<f64>,
    lambda_max: Option<f64>,
}

impl SmootherState {
    pub fn setup(spec: SmootherSpec, op: Arc<StencilOperator>) -> Result<Self> {
        spec.kind.check_omega(spec.omega)?;
        let omega = spec.omega;
        let mut clamped_from = None;
        let mut lambda_max = None;
        let mut effective = spec;
        let pre = match spec.kind {
            SmootherKind::Richardson => {
                let lambda = estimate_lambda_max(&op, 20);
                lambda_max = Some(lambda);
                let mut scale = omega;
                if omega > 1.0 / lambda {
                    scale = 0.9 / lambda;
                    clamped_from = Some(omega);
                    effective.omega = scale;
                }
                Preconditioner::Richardson { scale }
            }
            SmootherKind::Jacobi => Preconditioner::Jacobi,
            SmootherKind::GaussSeidel => Preconditioner::ForwardSweep { omega: 1.0 },
            SmootherKind::Sor => Preconditioner::ForwardSweep { omega },
            SmootherKind::Ilu0 => Preconditioner::Ilu0(Ilu0::factor(&op)?),
            SmootherKind::TriX | SmootherKind::GsTriX => Preconditioner::Line {
                lines: LineFactors::factor(&op, Axis::X, omega)?,
                gs: spec.kind == SmootherKind::GsTriX,
            },
            SmootherKind::TriY | SmootherKind::GsTriY => Preconditioner::Line {
                lines: LineFactors::factor(&op, Axis::Y, omega)?,
                gs: spec.kind == SmootherKind::GsTriY,
            },
            SmootherKind::Adi | SmootherKind::GsAdi => Preconditioner::Adi {
                x: LineFactors::factor(&op, Axis::X, omega)?,
                y: LineFactors::factor(&op, Axis::Y, omega)?,
                gs: spec.kind == SmootherKind::GsAdi,
            },
        };
        Ok(SmootherState {
            spec: effective,
            op,
            pre,
            clamped_from,
            lambda_max,
        })
    }

    /// The spec actually in use (Richardson's omega after clamping).
    pub fn spec(&self) -> SmootherSpec {
        self.spec
    }

    pub fn operator(&self) -> &Arc<StencilOperator> {
        &self.op
    }

    /// Originally requested omega, if Richardson clamped it.
    pub fn clamped_from(&self) -> Option<f64> {
        self.clamped_from
    }

    pub fn lambda_max(&self) -> Option<f64> {
        self.lambda_max
    }

    /// Number of reals held by the preconditioner beyond the operator itself.
    pub fn workspace_len(&self) -> usize {
        match &self.pre {
            Preconditioner::Richardson { .. }
            | Preconditioner::Jacobi
            | Preconditioner::ForwardSweep { .. } => 0,
            Preconditioner::Ilu0(f) => f.len(),
            Preconditioner::Line { lines, .. } => lines.len(),
            Preconditioner::Adi { x, y, .. } => x.len() + y.len(),
        }
    }

    /// `z = C^{-1} r`.
    pub fn apply_preconditioner(&self, r: &GridFunction) -> GridFunction {
        r.assert_on(&self.op.grid);
        let mut z = GridFunction::zeros(&self.op.grid);
        self.precondition_into(&r.values, &mut z.values);
        z
    }

    fn precondition_into(&self, r: &[f64], z: &mut [f64]) {
        let op = &*self.op;
        let nx = op.nx();
        match &self.pre {
            Preconditioner::Richardson { scale } => {
                for (zi, ri) in z.iter_mut().zip(r) {
                    *zi = scale * ri;
                }
            }
            Preconditioner::Jacobi => {
                for ((zi, ri), ci) in z.iter_mut().zip(r).zip(&op.c) {
                    *zi = ri / ci;
                }
            }
            Preconditioner::ForwardSweep { omega } => {
                for k in 0..r.len() {
                    let mut v = r[k];
                    if k % nx > 0 {
                        v -= omega * op.w[k] * z[k - 1];
                    }
                    if k >= nx {
                        v -= omega * op.s[k] * z[k - nx];
                    }
                    z[k] = v / op.c[k];
                }
            }
            Preconditioner::Ilu0(f) => f.apply(nx, r, z),
            Preconditioner::Line { lines, gs } => {
                lines.apply(op, r, z, gs.then_some(self.spec.omega));
            }
            Preconditioner::Adi { x, y, gs } => {
                let gs_omega = gs.then_some(self.spec.omega);
                x.apply(op, r, z, gs_omega);
                // second sweep acts on the defect left by the first
                let first = GridFunction {
                    level: op.level(),
                    nx,
                    ny: op.ny(),
                    values: z.to_vec(),
                };
                let az = op.apply(&first);
                let r2: Vec<f64> = r.iter().zip(&az.values).map(|(a, b)| a - b).collect();
                let mut z2 = vec![0.0; r.len()];
                y.apply(op, &r2, &mut z2, gs_omega);
                for (zi, di) in z.iter_mut().zip(&z2) {
                    *zi += di;
                }
            }
        }
    }

    /// One damped Richardson step, returning the new iterate.
    pub fn smooth_step(&self, x: &GridFunction, b: &GridFunction, omega_damp: f64) -> GridFunction {
        let mut out = x.clone();
        self.smooth_in_place(&mut out, b, omega_damp);
        out
    }

    pub fn smooth_in_place(&self, x: &mut GridFunction, b: &GridFunction, omega_damp: f64) {
        let d = self.op.residual(x, b);
        let mut z = vec![0.0; d.len()];
        self.precondition_into(&d.values, &mut z);
        for (xi, zi) in x.values.iter_mut().zip(&z) {
            *xi += omega_damp * zi;
        }
    }

    /// Power-iteration estimate of the spectral radius of `I - omega C^{-1} A`:
    /// the last ratio of successive error norms from a seeded random start.
    pub fn estimate_contraction(&self, omega_damp: f64, iterations: usize) -> f64 {
        let iterations = iterations.max(10);
        let grid = &self.op.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
        let mut e = GridFunction::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0));
        let zero = GridFunction::zeros(grid);
        let mut norm = e.norm2();
        e.scale(1.0 / norm);
        let mut ratio = 0.0;
        for _ in 0..iterations {
            self.smooth_in_place(&mut e, &zero, omega_damp);
            norm = e.norm2();
            ratio = norm;
            if norm == 0.0 || !norm.is_finite() {
                break;
            }
            e.scale(1.0 / norm);
        }
        ratio
    }
}

/// `||A v|| / ||v||` after `iterations` power steps from a seeded random start.
pub fn estimate_lambda_max(op: &StencilOperator, iterations: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED ^ 0xa11ce);
    let mut v = GridFunction::from_fn(&op.grid, |_, _| rng.gen_range(-1.0..1.0));
    let norm = v.norm2();
    v.scale(1.0 / norm);
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let av = op.apply(&v);
        lambda = av.norm2();
        if lambda == 0.0 {
            break;
        }
        v = av;
        v.scale(1.0 / lambda);
    }
    lambda
}
