"""Smoke test for the anisomg_py extension.

Build it first with `pip install -e crates/py --no-build-isolation`
(maturin backend), then run `python python/smoke_test.py`.
"""

import math
import tempfile
from pathlib import Path

import anisomg_py as mg


def check_grading():
    nodes = mg.grade_axis(7, 2.0)
    widths = [b - a for a, b in zip(nodes, nodes[1:])]
    assert nodes[0] == 0.0 and nodes[-1] == 1.0
    for w0, w1 in zip(widths, widths[1:]):
        assert abs(w1 / w0 - 2.0) < 1e-12


def check_schedule():
    levels = [lvl for lvl, _ in mg.cycle_schedule(4, "F")]
    assert levels == [4, 3, 2, 1, 2, 2, 1, 2, 3, 3, 2, 1, 2, 3, 4], levels


def check_solve():
    report = mg.solve(levels=5, smoother="gsadi", tol=1e-6)
    assert report.converged and not report.diverged
    assert report.final_relative_residual <= 1e-6
    assert report.shape == (31, 31) and len(report.solution) == 31 * 31
    # manufactured solution sin(pi x) sin(pi y)
    centre = report.solution[15 * 31 + 15]
    assert abs(centre - 1.0) < 1e-4, centre
    assert 0.0 < report.mean_rate() < 1.0

    stalled = mg.solve(smoother="jacobi", max_cycles=1, tol=1e-12)
    assert not stalled.converged and stalled.iterations == 1

    try:
        mg.solve(levels=0)
    except ValueError as err:
        assert "levels" in str(err)
    else:
        raise AssertionError("levels=0 must be rejected")


def check_preconditioner():
    n = 3
    r = [float(k + 1) for k in range(n * n)]
    z = mg.apply_preconditioner("jacobi", n, n, r)
    diag = 4.0 * (n + 1) ** 2
    assert all(abs(zi - ri / diag) < 1e-15 for zi, ri in zip(z, r))


def check_contraction():
    rho = mg.estimate_contraction(smoother="jacobi", levels=1, coarse_n=(7, 7), omega=1.0)
    assert abs(rho - math.cos(math.pi / 8)) < 1e-2, rho
    assert mg.estimate_contraction(smoother="tri_x", levels=1, coarse_n=(7, 1), omega=1.0) <= 1e-6


def check_study():
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "steps.csv"
        rows = mg.run_study("smoothing_steps", ["1", "2", "3", "4"], levels=5, smoother="gauss_seidel", out=str(out))
        assert [row["sweep_value"] for row in rows] == ["1", "2", "3", "4"]
        cycles = [row["cycles"] for row in rows]
        assert all(b <= a for a, b in zip(cycles, cycles[1:])), cycles
        assert out.read_text().splitlines()[0] == "sweep_value,cycles,final_rel_residual,mean_rate,converged,wall_ms"
        assert (Path(tmp) / "history_4.csv").exists()
    assert abs(mg.convergence_rate([1.0, 0.1, 0.01]) - 0.1) < 1e-15


if __name__ == "__main__":
    for check in (check_grading, check_schedule, check_solve, check_preconditioner, check_contraction, check_study):
        check()
        print(f"ok {check.__name__}")
