"""Offline stage: skeleton extraction, enrichment, basis and mixing matrix.

The pipeline runs coarse sweep -> skeleton selection -> fine skeleton solves
-> operator sampling -> (optional) residual-driven enrichment -> reduced
basis -> mixing-matrix regression -> skeleton-operator projection, and packs
the result into an immutable :class:`ReducedModel`.
"""

from __future__ import annotations

import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    TruncatedBasis,
    cpqr_select,
    cpqr_select_absolute,
    least_squares,
    project_out,
    truncated_svd,
)
from .oracle import (
    OperatorSamplePlan,
    Problem,
    SampleSpace,
    choose_column_plan,
    choose_entry_plan,
    coarse_sweep,
    sample_operators,
)

__all__ = [
    "Thresholds",
    "SkeletonSet",
    "ReducedModel",
    "PipelineError",
    "get_skeletons",
    "solve_fine_skeletons",
    "additional_skeletons",
    "build_reduced_basis",
    "build_mixing_matrix",
    "project_skeleton_operators",
    "run_offline",
]


class PipelineError(RuntimeError):
    """Wraps a stage failure with the stage name."""


@dataclass(frozen=True)
class Thresholds:
    """Selection/truncation threshold and the enrichment multiplier.

    The same epsilon drives skeleton selection, SVD cropping, and (scaled by
    eta) the residual threshold for additional skeletons.
    """

    epsilon: float
    eta: float = 1.5

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.eta <= 0.0:
            raise ValueError(f"eta must be positive, got {self.eta}")


@dataclass
class SkeletonSet:
    """Selected skeleton parameters with their fine solves retained."""

    indices: np.ndarray
    fine_solutions: np.ndarray
    rhs_vectors: np.ndarray
    handles: list
    additional_indices: np.ndarray = field(
        default_factory=lambda: np.array([], dtype=int)
    )

    @property
    def all_indices(self) -> np.ndarray:
        return np.concatenate([self.indices, self.additional_indices])

    @property
    def size(self) -> int:
        return self.all_indices.size


@dataclass
class ReducedModel:
    """Everything the online stage needs, immutable after construction.

    ``projected_operators`` holds one column per skeleton: vec(Q^T B Q)
    with column stacking (Q^T L Q for problems without an offset).
    """

    problem_name: str
    fine_dim: int
    epsilon: float
    eta: float
    skeleton_indices: np.ndarray
    additional_indices: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray
    mixing: np.ndarray
    projected_operators: np.ndarray
    projected_offset: np.ndarray | None
    projected_rhs: np.ndarray | None
    rhs_mode: str
    operator_plan_columns: np.ndarray
    timings: dict = field(default_factory=dict)

    @property
    def n_rb(self) -> int:
        return self.basis.shape[1]

    @property
    def n_skeletons(self) -> int:
        return self.skeleton_indices.size + self.additional_indices.size

    @property
    def n_samples(self) -> int:
        return self.mixing.shape[1]

    def all_skeleton_indices(self) -> np.ndarray:
        return np.concatenate([self.skeleton_indices, self.additional_indices])


def get_skeletons(coarse_solutions: np.ndarray, eps: float) -> np.ndarray:
    """Skeleton sample indices from CPQR of the coarse sweep matrix."""
    sel = cpqr_select(coarse_solutions, eps)
    return sel.permutation[: sel.kept].copy()


def solve_fine_skeletons(
    problem: Problem,
    omega: SampleSpace,
    skeleton_indices: np.ndarray,
    jobs: int = 1,
) -> SkeletonSet:
    """Fine solves for the selected skeleton parameters, in skeleton order."""
    skeleton_indices = np.asarray(skeleton_indices, dtype=int)
    if skeleton_indices.size == 0:
        raise ValueError("skeleton index set is empty")
    picked = [omega[int(i)] for i in skeleton_indices]
    if jobs <= 1:
        results = [problem.fine_solve(s) for s in picked]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(problem.fine_solve, picked))
    return SkeletonSet(
        indices=skeleton_indices.copy(),
        fine_solutions=np.column_stack([r.solution for r in results]),
        rhs_vectors=np.column_stack([r.rhs for r in results]),
        handles=[r.handle for r in results],
    )


def additional_skeletons(
    op_samples: np.ndarray,
    skeletons: SkeletonSet,
    thresholds: Thresholds,
    problem: Problem,
    omega: SampleSpace,
    append_solutions: bool = True,
) -> SkeletonSet:
    """Promote samples whose operator samples the current skeletons miss.

    Projects the skeleton columns out of the operator samples, runs CPQR on
    the residual, and keeps columns whose pivot reaches eta * epsilon times
    the largest unprojected column norm.  The selected parameters are fine
    solved and appended; an empty selection returns ``skeletons`` unchanged.
    """
    existing = skeletons.all_indices
    a = float(np.max(np.linalg.norm(op_samples, axis=0)))
    if a == 0.0:
        return skeletons
    residual = project_out(op_samples, op_samples[:, existing])
    tol = thresholds.eta * thresholds.epsilon * a
    sel = cpqr_select_absolute(residual, tol)
    chosen = [int(i) for i in sel.permutation[: sel.kept] if int(i) not in set(existing)]
    if not chosen:
        return skeletons
    extra = solve_fine_skeletons(problem, omega, np.array(chosen, dtype=int))
    fine = skeletons.fine_solutions
    rhs = skeletons.rhs_vectors
    if append_solutions:
        fine = np.column_stack([fine, extra.fine_solutions])
    rhs = np.column_stack([rhs, extra.rhs_vectors])
    return SkeletonSet(
        indices=skeletons.indices.copy(),
        fine_solutions=fine,
        rhs_vectors=rhs,
        handles=list(skeletons.handles) + list(extra.handles),
        additional_indices=np.array(chosen, dtype=int),
    )


def build_reduced_basis(skeletons: SkeletonSet, eps: float) -> TruncatedBasis:
    """Orthonormal basis from the SVD of the fine skeleton solutions.

    Columns are normalized before the SVD: skeleton solution norms can
    differ by orders of magnitude, and an unnormalized cut at sigma_1
    leaves small-norm skeletons with large *relative* truncation error.
    Normalizing makes the epsilon cut control each skeleton's relative
    reconstruction uniformly.
    """
    solutions = skeletons.fine_solutions
    norms = np.linalg.norm(solutions, axis=0)
    return truncated_svd(solutions / np.where(norms > 0.0, norms, 1.0), eps)


def build_mixing_matrix(
    op_samples: np.ndarray, skeleton_indices: np.ndarray
) -> np.ndarray:
    """Interpolation coefficients expressing every sampled operator as a
    combination of the skeleton operators' samples."""
    skeleton_indices = np.asarray(skeleton_indices, dtype=int)
    if op_samples.shape[0] < skeleton_indices.size:
        warnings.warn(
            f"operator sample budget {op_samples.shape[0]} is smaller than the "
            f"skeleton count {skeleton_indices.size}; the regression is "
            "underdetermined and returns the minimum-norm solution",
            stacklevel=2,
        )
    return least_squares(op_samples[:, skeleton_indices], op_samples)


def project_skeleton_operators(
    skeletons: SkeletonSet, basis: TruncatedBasis
) -> np.ndarray:
    """vec(Q^T B Q) per skeleton, computed through the operator handles."""
    q = basis.basis
    cols = [
        handle.project_varying(q).ravel(order="F") for handle in skeletons.handles
    ]
    return np.column_stack(cols)


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"offline stage '{name}' failed: {exc}") from exc


def run_offline(
    problem: Problem,
    thresholds: Thresholds,
    *,
    omega: SampleSpace | None = None,
    enrich: bool = True,
    append_solutions: bool = True,
    operator_columns: int | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> ReducedModel:
    """Full offline pipeline producing a :class:`ReducedModel`.

    ``operator_columns`` fixes the number of whole operator columns sampled
    for the mixing regression; by default max(8 s, 8) scattered entries are
    drawn instead, which generalizes much better than column slices of the
    same size.
    """
    t_start = time.perf_counter()
    timings: dict[str, float] = {}

    if omega is None:
        with _stage("sample_space"):
            omega = problem.sample_space()

    t0 = time.perf_counter()
    with _stage("coarse_sweep"):
        coarse = coarse_sweep(problem, omega, jobs=jobs)
    timings["t_coarse_sweep"] = time.perf_counter() - t0

    with _stage("get_skeletons"):
        indices = get_skeletons(coarse, thresholds.epsilon)

    with _stage("solve_fine_skeletons"):
        skeletons = solve_fine_skeletons(problem, omega, indices, jobs=jobs)

    with _stage("sample_operators"):
        n = problem.fine_dim
        rng = np.random.default_rng(seed)
        if operator_columns is None:
            plan = choose_entry_plan(n, max(8 * skeletons.size, 8), rng)
        else:
            plan = choose_column_plan(n, int(operator_columns), rng)
        op_samples = sample_operators(problem, omega, plan, jobs=jobs)

    if enrich:
        with _stage("additional_skeletons"):
            skeletons = additional_skeletons(
                op_samples,
                skeletons,
                thresholds,
                problem,
                omega,
                append_solutions=append_solutions,
            )

    with _stage("build_reduced_basis"):
        basis = build_reduced_basis(skeletons, thresholds.epsilon)

    with _stage("build_mixing_matrix"):
        mixing = build_mixing_matrix(op_samples, skeletons.all_indices)

    with _stage("project_skeleton_operators"):
        projected_ops = project_skeleton_operators(skeletons, basis)
        projected_offset = problem.offset_project(basis.basis)
        projected_rhs = basis.basis.T @ skeletons.rhs_vectors

    timings["t_offline"] = time.perf_counter() - t_start
    return ReducedModel(
        problem_name=problem.name,
        fine_dim=problem.fine_dim,
        epsilon=thresholds.epsilon,
        eta=thresholds.eta,
        skeleton_indices=skeletons.indices.copy(),
        additional_indices=skeletons.additional_indices.copy(),
        basis=basis.basis,
        singular_values=basis.singular_values,
        mixing=mixing,
        projected_operators=projected_ops,
        projected_offset=projected_offset,
        projected_rhs=projected_rhs,
        rhs_mode=problem.rhs_mode,
        operator_plan_columns=plan.columns,
        timings=timings,
    )
