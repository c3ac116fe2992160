"""Online stage: interpolate the reduced operator, solve, lift, and report.

Each solve costs an n_rb x n_rb dense system; batch evaluation optionally
computes fine reference solutions for error reporting.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .offline import ReducedModel
from .oracle import Problem, SampleSpace

__all__ = [
    "ReducedSolveResult",
    "ErrorReport",
    "IllConditionedError",
    "assemble_reduced_operator",
    "interpolated_reduced_rhs",
    "reduced_solve",
    "batch_evaluate",
]

# Condition numbers beyond this are reported as failures rather than
# returning silently inaccurate solutions.
CONDITION_LIMIT = 1e12


class IllConditionedError(RuntimeError):
    """Raised when the interpolated reduced operator is numerically singular."""


@dataclass
class ReducedSolveResult:
    sample_index: int
    reduced_coefficients: np.ndarray
    lifted_solution: np.ndarray


@dataclass
class ErrorReport:
    """Per-sample relative L2 errors and batch timings.

    ``errors`` is None when no reference solves were requested; failed
    samples are excluded from the mean and listed in ``failures``.
    """

    sample_indices: np.ndarray
    solve_times: np.ndarray
    t_online: float
    errors: np.ndarray | None = None
    t_fine: float | None = None
    failures: list = field(default_factory=list)

    @property
    def mean_error(self) -> float | None:
        if self.errors is None:
            return None
        valid = self.errors[np.isfinite(self.errors)]
        if valid.size == 0:
            return float("nan")
        return float(np.mean(valid))


def assemble_reduced_operator(model: ReducedModel, i: int) -> np.ndarray:
    """Interpolated projected operator at sample i (offset included)."""
    if not 0 <= i < model.n_samples:
        raise IndexError(f"sample index {i} out of range [0, {model.n_samples})")
    n_rb = model.n_rb
    vec = model.projected_operators @ model.mixing[:, i]
    op = vec.reshape((n_rb, n_rb), order="F")
    if model.projected_offset is not None:
        op = op + model.projected_offset
    return op


def interpolated_reduced_rhs(model: ReducedModel, i: int) -> np.ndarray:
    """Reduced right-hand side interpolated from the skeleton ones."""
    if model.projected_rhs is None:
        raise ValueError("model carries no projected skeleton right-hand sides")
    return model.projected_rhs @ model.mixing[:, i]


def _reduced_rhs(model: ReducedModel, problem: Problem, omega: SampleSpace, i: int):
    if model.rhs_mode == "interpolated":
        return interpolated_reduced_rhs(model, i)
    return problem.rhs_reduced(model.basis, omega[i])


def reduced_solve(
    model: ReducedModel, problem: Problem, omega: SampleSpace, i: int
) -> ReducedSolveResult:
    """Solve the interpolated reduced system for sample i and lift."""
    op = assemble_reduced_operator(model, i)
    cond = np.linalg.cond(op)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedError(
            f"reduced system ill-conditioned at sample {i} (cond ~ {cond:.2e})"
        )
    f_rb = _reduced_rhs(model, problem, omega, i)
    v = np.linalg.solve(op, f_rb)
    return ReducedSolveResult(
        sample_index=i,
        reduced_coefficients=v,
        lifted_solution=model.basis @ v,
    )


def batch_evaluate(
    model: ReducedModel,
    problem: Problem,
    omega: SampleSpace,
    with_reference: bool = False,
    reference: np.ndarray | None = None,
    t_fine: float | None = None,
    jobs: int = 1,
) -> ErrorReport:
    """Solve every sample in the reduced space; optionally compare against
    fine reference solutions.

    A precomputed ``reference`` matrix (one fine solution per column, with
    its measured ``t_fine``) may be supplied to avoid re-solving; otherwise
    reference solves are run and timed here.  Per-sample failures are
    recorded and excluded from the mean, not fatal.
    """
    p = omega.size
    solve_times = np.zeros(p)
    lifted = np.full((model.basis.shape[0], p), np.nan)
    failures: list[tuple[int, str]] = []

    t0 = time.perf_counter()
    for i in range(p):
        t_i = time.perf_counter()
        try:
            res = reduced_solve(model, problem, omega, i)
            lifted[:, i] = res.lifted_solution
        except (IllConditionedError, np.linalg.LinAlgError) as exc:
            failures.append((i, str(exc)))
        solve_times[i] = time.perf_counter() - t_i
    t_online = time.perf_counter() - t0

    errors = None
    if with_reference:
        if reference is None:
            t_ref = time.perf_counter()
            if jobs > 1:
                from concurrent.futures import ThreadPoolExecutor

                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    sols = list(pool.map(problem.fine_solve, omega.samples))
            else:
                sols = [problem.fine_solve(s) for s in omega.samples]
            reference = np.column_stack([r.solution for r in sols])
            t_fine = time.perf_counter() - t_ref
        errors = np.full(p, np.nan)
        failed = {i for i, _ in failures}
        for i in range(p):
            if i in failed:
                continue
            denom = np.linalg.norm(reference[:, i])
            if denom == 0.0:
                errors[i] = float(np.linalg.norm(lifted[:, i]))
            else:
                errors[i] = float(
                    np.linalg.norm(reference[:, i] - lifted[:, i]) / denom
                )

    return ErrorReport(
        sample_indices=np.arange(p),
        solve_times=solve_times,
        t_online=t_online,
        errors=errors,
        t_fine=t_fine,
        failures=failures,
    )
