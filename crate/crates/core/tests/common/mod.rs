//! Dense reference implementations shared by the integration tests.
//!
//! Everything here is built from grid coordinates and textbook formulas with
//! `nalgebra`, never by calling the matrix-free kernels under test.

#![allow(dead_code)]

use anisomg::{CoordinateSystem, GridFunction, LevelGrid, SmootherKind};
use nalgebra::{DMatrix, DVector};

pub fn to_dense(f: &GridFunction) -> DVector<f64> {
    DVector::from_column_slice(&f.values)
}

pub fn to_grid(grid: &LevelGrid, v: &DVector<f64>) -> GridFunction {
    GridFunction::from_values(grid, v.as_slice().to_vec())
}

pub fn max_abs_diff(a: &DVector<f64>, b: &GridFunction) -> f64 {
    a.iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Dense five-point operator assembled face by face.
///
/// Each face between two nodes contributes a conductance `k` to both
/// diagonals and `-k` to the off-diagonal pair; faces touching the boundary
/// only feed the diagonal.
pub fn dense_operator(grid: &LevelGrid, alpha: f64, beta: f64) -> DMatrix<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let x = &grid.x_coords;
    let y = &grid.y_coords;
    let scale = ((nx + 1) * (ny + 1)) as f64;
    let mut a = DMatrix::zeros(nx * ny, nx * ny);
    let interior = |p: usize, q: usize| -> Option<usize> {
        (p >= 1 && p <= nx && q >= 1 && q <= ny).then(|| (q - 1) * nx + (p - 1))
    };
    let add_face = |a: &mut DMatrix<f64>, k: f64, p0: (usize, usize), p1: (usize, usize)| {
        let i0 = interior(p0.0, p0.1);
        let i1 = interior(p1.0, p1.1);
        if let Some(i) = i0 {
            a[(i, i)] += k;
        }
        if let Some(j) = i1 {
            a[(j, j)] += k;
        }
        if let (Some(i), Some(j)) = (i0, i1) {
            a[(i, j)] -= k;
            a[(j, i)] -= k;
        }
    };

    // vertical faces: between (p, q) and (p + 1, q) for interior rows q
    for q in 1..=ny {
        let height = 0.5 * (y[q + 1] - y[q - 1]);
        for p in 0..=nx {
            let h = x[p + 1] - x[p];
            let r_face = 0.5 * (x[p] + x[p + 1]);
            let metric = match grid.coord_system {
                CoordinateSystem::Cartesian => 1.0,
                CoordinateSystem::Cylindrical => r_face,
                CoordinateSystem::Spherical => r_face * r_face * y[q].sin(),
            };
            add_face(&mut a, scale * alpha * metric * height / h, (p, q), (p + 1, q));
        }
    }
    // horizontal faces: between (p, q) and (p, q + 1) for interior columns p
    for p in 1..=nx {
        let width = 0.5 * (x[p + 1] - x[p - 1]);
        for q in 0..=ny {
            let h = y[q + 1] - y[q];
            let metric = match grid.coord_system {
                CoordinateSystem::Cartesian => 1.0,
                CoordinateSystem::Cylindrical => x[p],
                CoordinateSystem::Spherical => (0.5 * (y[q] + y[q + 1])).sin(),
            };
            add_face(&mut a, scale * beta * metric * width / h, (p, q), (p, q + 1));
        }
    }
    a
}

/// Bilinear interpolation weight of coarse node `c` (physical index) at fine
/// node `p` along one axis.
fn hat(fine: &[f64], p: usize, c: usize) -> f64 {
    let xc = fine[2 * c];
    let xp = fine[p];
    if p == 2 * c {
        return 1.0;
    }
    if p + 1 == 2 * c {
        let xl = fine[2 * c - 2];
        return (xp - xl) / (xc - xl);
    }
    if p == 2 * c + 1 {
        let xr = fine[2 * c + 2];
        return (xr - xp) / (xr - xc);
    }
    0.0
}

/// Dense prolongation from the even-node parent of `fine`.
pub fn dense_prolongation(fine: &LevelGrid) -> DMatrix<f64> {
    let (nfx, nfy) = (fine.nx, fine.ny);
    let (ncx, ncy) = ((nfx - 1) / 2, (nfy - 1) / 2);
    let mut p = DMatrix::zeros(nfx * nfy, ncx * ncy);
    for fj in 0..nfy {
        for fi in 0..nfx {
            for cj in 0..ncy {
                for ci in 0..ncx {
                    let w = hat(&fine.x_coords, fi + 1, ci + 1) * hat(&fine.y_coords, fj + 1, cj + 1);
                    p[(fj * nfx + fi, cj * ncx + ci)] = w;
                }
            }
        }
    }
    p
}

/// Transpose of `p` with each row scaled to unit sum.
pub fn dense_restriction(p: &DMatrix<f64>) -> DMatrix<f64> {
    let mut r = p.transpose();
    for mut row in r.row_iter_mut() {
        let s: f64 = row.sum();
        row /= s;
    }
    r
}

/// Parts of `a` by coupling direction on an `nx`-wide lexicographic grid.
pub struct Split {
    pub diag: DMatrix<f64>,
    pub west: DMatrix<f64>,
    pub east: DMatrix<f64>,
    pub south: DMatrix<f64>,
    pub north: DMatrix<f64>,
}

pub fn split(a: &DMatrix<f64>, nx: usize) -> Split {
    let n = a.nrows();
    let pick = |keep: &dyn Fn(usize, usize) -> bool| {
        DMatrix::from_fn(n, n, |i, j| if keep(i, j) { a[(i, j)] } else { 0.0 })
    };
    Split {
        diag: pick(&|i, j| i == j),
        west: pick(&|i, j| j + 1 == i && i % nx != 0),
        east: pick(&|i, j| i + 1 == j && j % nx != 0),
        south: pick(&|i, j| j + nx == i),
        north: pick(&|i, j| i + nx == j),
    }
}

/// Zero-fill incomplete LU restricted to the sparsity pattern of `a`;
/// returns `L U` with unit-diagonal `L`.
pub fn dense_ilu0(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut f = a.clone();
    for i in 1..n {
        for k in 0..i {
            if a[(i, k)] == 0.0 {
                continue;
            }
            f[(i, k)] /= f[(k, k)];
            for j in (k + 1)..n {
                if a[(i, j)] != 0.0 {
                    f[(i, j)] -= f[(i, k)] * f[(k, j)];
                }
            }
        }
    }
    let l = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => f[(i, j)],
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Less => 0.0,
    });
    let u = f.upper_triangle();
    l * u
}

pub fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().lu().try_inverse().expect("nonsingular")
}

/// Dense `C^{-1}` of a smoother with parameter `omega_s`.
pub fn dense_preconditioner_inverse(kind: SmootherKind, a: &DMatrix<f64>, nx: usize, omega_s: f64) -> DMatrix<f64> {
    let s = split(a, nx);
    let n = a.nrows();
    let tri_x = || (&s.diag + &s.west + &s.east) * omega_s;
    let tri_y = || (&s.diag + &s.south + &s.north) * omega_s;
    let gstri_x = || tri_x() + &s.south * omega_s;
    let gstri_y = || tri_y() + &s.west * omega_s;
    // multiplicative composition: z = Cx^-1 r + Cy^-1 (r - A Cx^-1 r)
    let compose = |cx: DMatrix<f64>, cy: DMatrix<f64>| {
        let ix = inverse(&cx);
        let iy = inverse(&cy);
        &ix + &iy - &iy * a * &ix
    };
    match kind {
        SmootherKind::Richardson => DMatrix::identity(n, n) * omega_s,
        SmootherKind::Jacobi => inverse(&s.diag),
        SmootherKind::GaussSeidel => inverse(&(&s.diag + &s.west + &s.south)),
        SmootherKind::Sor => inverse(&(&s.diag + (&s.west + &s.south) * omega_s)),
        SmootherKind::Ilu0 => inverse(&dense_ilu0(a)),
        SmootherKind::TriX => inverse(&tri_x()),
        SmootherKind::TriY => inverse(&tri_y()),
        SmootherKind::GsTriX => inverse(&gstri_x()),
        SmootherKind::GsTriY => inverse(&gstri_y()),
        SmootherKind::Adi => compose(tri_x(), tri_y()),
        SmootherKind::GsAdi => compose(gstri_x(), gstri_y()),
    }
}

/// Spectral radius of `I - omega M a` from its full eigenvalue set.
pub fn dense_iteration_radius(minv: &DMatrix<f64>, a: &DMatrix<f64>, omega: f64) -> f64 {
    let n = a.nrows();
    let b = DMatrix::identity(n, n) - minv * a * omega;
    b.try_schur(1e-14, 100_000)
        .expect("Schur iteration converges")
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Extremal eigenvalues of a symmetric matrix.
pub fn symmetric_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let ev = a.clone().symmetric_eigen().eigenvalues;
    (ev.min(), ev.max())
}

/// Spectral radius of `I - omega D^{-1} a` through the symmetric matrix
/// `D^{-1/2} a D^{-1/2}`.
pub fn dense_jacobi_radius(a: &DMatrix<f64>, omega: f64) -> f64 {
    let n = a.nrows();
    let s = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (a[(i, i)] * a[(j, j)]).sqrt());
    let (lo, hi) = symmetric_extremes(&s);
    (1.0 - omega * lo).abs().max((1.0 - omega * hi).abs())
}
