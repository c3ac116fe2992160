"""Abstraction boundary between the generic pipeline and a concrete problem.

A :class:`Problem` exposes a cheap coarse solver used only to rank parameter
importance, an expensive fine solver, and deferred access to the fine
operators through :class:`OperatorHandle` so the pipeline never has to hold
``n x n`` storage for more than one operator at a time.

Vectorized operators use column stacking (Fortran order) throughout, so one
operator column occupies a contiguous run of vec-indices.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ParameterSample",
    "SampleSpace",
    "OperatorHandle",
    "FineSolution",
    "Problem",
    "OperatorSamplePlan",
    "SolveFailure",
    "coarse_sweep",
    "sample_operators",
    "choose_column_plan",
    "choose_entry_plan",
]


class SolveFailure(RuntimeError):
    """A per-sample solver failure, carrying the sample index."""

    def __init__(self, sample_index: int, message: str):
        super().__init__(f"sample {sample_index}: {message}")
        self.sample_index = sample_index


@dataclass(frozen=True)
class ParameterSample:
    """One point of the discrete sample space."""

    index: int
    coefficients: np.ndarray


@dataclass(frozen=True)
class SampleSpace:
    """Ordered collection of parameter samples; column i of every sweep
    matrix corresponds to sample i."""

    samples: tuple[ParameterSample, ...]

    @classmethod
    def from_matrix(cls, coefficients: np.ndarray) -> "SampleSpace":
        coefficients = np.atleast_2d(np.asarray(coefficients, dtype=float))
        return cls(
            samples=tuple(
                ParameterSample(index=i, coefficients=row.copy())
                for i, row in enumerate(coefficients)
            )
        )

    @property
    def size(self) -> int:
        return len(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i: int) -> ParameterSample:
        return self.samples[i]

    def coefficient_matrix(self) -> np.ndarray:
        return np.array([s.coefficients for s in self.samples])


class OperatorHandle:
    """Deferred access to one fine operator L = offset + B.

    ``assemble`` materializes the varying part B on demand; ``column``
    evaluates selected columns of B directly, without full assembly.  For
    problems without a natural offset, ``offset`` is None and B is the whole
    operator.  The offset, when present, is either a scalar c (meaning c*I)
    or a dense matrix.
    """

    def __init__(
        self,
        dim: int,
        assemble: Callable[[], np.ndarray],
        column: Callable[[np.ndarray], np.ndarray],
        offset: float | np.ndarray | None = None,
    ):
        self.dim = dim
        self._assemble = assemble
        self._column = column
        self.offset = offset

    def varying_matrix(self) -> np.ndarray:
        """Dense varying part B (assembled on demand, not cached)."""
        return self._assemble()

    def matrix(self) -> np.ndarray:
        """Dense full operator offset + B."""
        b = self.varying_matrix()
        if self.offset is None:
            return b
        if np.isscalar(self.offset):
            b = b + float(self.offset) * np.eye(self.dim)
        else:
            b = b + self.offset
        return b

    def varying_columns(self, indices: np.ndarray) -> np.ndarray:
        return self._column(np.asarray(indices, dtype=int))

    def apply_varying(self, v: np.ndarray) -> np.ndarray:
        return self.varying_matrix() @ v

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.apply_varying(v)
        if self.offset is None:
            return out
        if np.isscalar(self.offset):
            return out + float(self.offset) * v
        return out + self.offset @ v

    def varying_entries(self, vec_indices: np.ndarray) -> np.ndarray:
        """Entries of vec(B) (column stacking) at the requested indices."""
        vec_indices = np.asarray(vec_indices, dtype=int)
        cols = vec_indices // self.dim
        rows = vec_indices % self.dim
        uniq, inverse = np.unique(cols, return_inverse=True)
        block = self.varying_columns(uniq)
        return block[rows, inverse]

    def project_varying(self, q: np.ndarray) -> np.ndarray:
        """Q^T B Q without retaining the dense operator."""
        b = self.varying_matrix()
        return q.T @ (b @ q)

    def project_offset(self, q: np.ndarray) -> np.ndarray | None:
        if self.offset is None:
            return None
        if np.isscalar(self.offset):
            return float(self.offset) * np.eye(q.shape[1])
        return q.T @ (self.offset @ q)

    def project(self, q: np.ndarray) -> np.ndarray:
        """Q^T L Q including the offset."""
        out = self.project_varying(q)
        off = self.project_offset(q)
        return out if off is None else out + off


@dataclass
class FineSolution:
    """Fine solve output: solution vector, assembled right-hand side, and a
    handle for later operator access."""

    solution: np.ndarray
    rhs: np.ndarray
    handle: OperatorHandle


class Problem:
    """Base class for a parameterized integral-equation problem.

    Subclasses provide discretizations at a fine and a coarse resolution,
    operator handles, and right-hand sides.  ``rhs_mode`` selects how the
    online stage assembles the reduced right-hand side: ``"direct"`` forms
    f and applies Q^T, ``"interpolated"`` reuses the operator mixing
    coefficients on stored skeleton right-hand sides.
    """

    name: str = "problem"
    rhs_mode: str = "direct"

    @property
    def fine_dim(self) -> int:
        raise NotImplementedError

    @property
    def coarse_dim(self) -> int:
        raise NotImplementedError

    @property
    def has_offset(self) -> bool:
        return False

    def sample_space(self) -> SampleSpace:
        raise NotImplementedError

    def coarse_solve(self, sample: ParameterSample) -> np.ndarray:
        raise NotImplementedError

    def operator_handle(self, sample: ParameterSample) -> OperatorHandle:
        raise NotImplementedError

    def fine_rhs(self, sample: ParameterSample) -> np.ndarray:
        raise NotImplementedError

    def fine_solve(self, sample: ParameterSample) -> FineSolution:
        """Dense direct solve (LU with partial pivoting) at fine resolution."""
        handle = self.operator_handle(sample)
        full = handle.matrix()
        rhs = self.fine_rhs(sample)
        try:
            u = np.linalg.solve(full, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolveFailure(sample.index, f"fine solve failed: {exc}") from exc
        return FineSolution(solution=u, rhs=rhs, handle=handle)

    def rhs_reduced(self, q: np.ndarray, sample: ParameterSample) -> np.ndarray:
        return q.T @ self.fine_rhs(sample)

    def offset_project(self, q: np.ndarray) -> np.ndarray | None:
        if not self.has_offset:
            return None
        space = self.sample_space()
        return self.operator_handle(space[0]).project_offset(q)


@dataclass(frozen=True)
class OperatorSamplePlan:
    """Fixed set of vec(L) entries to sample, chosen once per offline run."""

    dim: int
    vec_indices: np.ndarray

    @classmethod
    def from_columns(cls, dim: int, columns: Sequence[int]) -> "OperatorSamplePlan":
        columns = np.asarray(sorted(columns), dtype=int)
        vec = (columns[:, None] * dim + np.arange(dim)[None, :]).ravel()
        return cls(dim=dim, vec_indices=vec)

    @property
    def size(self) -> int:
        return self.vec_indices.size

    @property
    def columns(self) -> np.ndarray:
        return np.unique(self.vec_indices // self.dim)


def choose_column_plan(
    dim: int, n_columns: int, rng: np.random.Generator
) -> OperatorSamplePlan:
    """Draw ``n_columns`` distinct operator columns uniformly at random."""
    n_columns = min(max(int(n_columns), 1), dim)
    cols = rng.choice(dim, size=n_columns, replace=False)
    return OperatorSamplePlan.from_columns(dim, cols)


def choose_entry_plan(
    dim: int, n_entries: int, rng: np.random.Generator
) -> OperatorSamplePlan:
    """Draw ``n_entries`` distinct vec(L) entries uniformly at random.

    Scattered entries cover far more operator columns than whole-column
    slices of the same size, which makes the mixing regression generalize
    to parameters away from the skeletons.
    """
    n_entries = min(max(int(n_entries), 1), dim * dim)
    vec = rng.choice(dim * dim, size=n_entries, replace=False)
    vec.sort()
    return OperatorSamplePlan(dim=dim, vec_indices=np.asarray(vec, dtype=int))


def _map_columns(fn, omega: SampleSpace, jobs: int) -> list[np.ndarray]:
    """Evaluate fn over samples, preserving sample order in the output."""
    if jobs <= 1:
        return [fn(s) for s in omega]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, omega.samples))


def coarse_sweep(problem: Problem, omega: SampleSpace, jobs: int = 1) -> np.ndarray:
    """Coarse-proxy solutions, one column per sample in sample order."""

    def solve(sample: ParameterSample) -> np.ndarray:
        try:
            return problem.coarse_solve(sample)
        except SolveFailure:
            raise
        except Exception as exc:
            raise SolveFailure(sample.index, f"coarse solve failed: {exc}") from exc

    cols = _map_columns(solve, omega, jobs)
    return np.column_stack(cols)


def sample_operators(
    problem: Problem,
    omega: SampleSpace,
    plan: OperatorSamplePlan,
    jobs: int = 1,
) -> np.ndarray:
    """Sampled operator entries, |plan| rows by p columns.

    Entry (k, i) is the plan's k-th vec entry of the varying part of the
    operator at sample i.
    """

    def fetch(sample: ParameterSample) -> np.ndarray:
        handle = problem.operator_handle(sample)
        return handle.varying_entries(plan.vec_indices)

    cols = _map_columns(fetch, omega, jobs)
    return np.column_stack(cols)
