"""Synthetic verification problem with an exactly affine operator family.

L(omega) = A + sum_j T_j(2 omega - 1) B_j for a scalar omega in [0, 1],
with Chebyshev coefficient functions so the regression is well-conditioned
by construction.  Because the varying part lives in an r-dimensional span,
the operator interpolation is exact once r independent skeletons are
selected, which makes every pipeline stage checkable to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..oracle import (
    OperatorHandle,
    ParameterSample,
    Problem,
    SampleSpace,
)

__all__ = ["AffineConfig", "AffineFamilyProblem"]

_MAX_REGENERATIONS = 100
_CONDITION_LIMIT = 1e6


@dataclass(frozen=True)
class AffineConfig:
    dimension: int = 64
    rank: int = 3
    n_samples: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 4:
            raise ValueError("dimension must be at least 4")
        if not 1 <= self.rank <= self.dimension:
            raise ValueError("rank must lie in [1, dimension]")


def _chebyshev(j: int, t: np.ndarray) -> np.ndarray:
    return np.cos(j * np.arccos(np.clip(t, -1.0, 1.0)))


class AffineFamilyProblem(Problem):
    """Random affine operator family with a dense shared offset.

    The coarse proxy is the same family restricted to the leading principal
    submatrices of half dimension.  The family is regenerated from the seed
    stream until every sampled operator is well-conditioned.
    """

    name = "synthetic_affine"
    rhs_mode = "direct"

    def __init__(self, config: AffineConfig = AffineConfig()):
        self.config = config
        n, r = config.dimension, config.rank
        seq = np.random.SeedSequence(config.seed)
        for _ in range(_MAX_REGENERATIONS):
            rng = np.random.default_rng(seq.spawn(1)[0])
            self.offset = 4.0 * np.eye(n) + 0.5 * rng.standard_normal((n, n)) / np.sqrt(n)
            self.terms = [
                0.2 * rng.standard_normal((n, n)) / np.sqrt(n) for _ in range(r)
            ]
            self.source_base = rng.standard_normal(n)
            if self._well_conditioned():
                break
        else:
            raise RuntimeError("failed to generate a well-conditioned family")

    def _well_conditioned(self) -> bool:
        probe = np.linspace(0.0, 1.0, 9)
        conds = [np.linalg.cond(self._operator(w)) for w in probe]
        return max(conds) < _CONDITION_LIMIT

    def coefficients(self, omega: float) -> np.ndarray:
        t = 2.0 * float(omega) - 1.0
        return np.array(
            [_chebyshev(j, np.array(t)) for j in range(1, self.config.rank + 1)]
        )

    def _varying(self, omega: float) -> np.ndarray:
        c = self.coefficients(omega)
        out = np.zeros_like(self.offset)
        for cj, bj in zip(c, self.terms):
            out += cj * bj
        return out

    def _operator(self, omega: float) -> np.ndarray:
        return self.offset + self._varying(omega)

    @property
    def fine_dim(self) -> int:
        return self.config.dimension

    @property
    def coarse_dim(self) -> int:
        return self.config.dimension // 2

    @property
    def has_offset(self) -> bool:
        return True

    def sample_space(self) -> SampleSpace:
        omegas = np.linspace(0.0, 1.0, self.config.n_samples)
        return SampleSpace.from_matrix(omegas[:, None])

    def coarse_solve(self, sample: ParameterSample) -> np.ndarray:
        m = self.coarse_dim
        op = self._operator(float(sample.coefficients[0]))[:m, :m]
        return np.linalg.solve(op, self.fine_rhs(sample)[:m])

    def operator_handle(self, sample: ParameterSample) -> OperatorHandle:
        omega = float(sample.coefficients[0])

        def assemble() -> np.ndarray:
            return self._varying(omega)

        def column(indices: np.ndarray) -> np.ndarray:
            return self._varying(omega)[:, indices]

        return OperatorHandle(
            dim=self.config.dimension,
            assemble=assemble,
            column=column,
            offset=self.offset,
        )

    def fine_rhs(self, sample: ParameterSample) -> np.ndarray:
        return self.source_base * (1.0 + float(sample.coefficients[0]))

    def offset_project(self, q: np.ndarray) -> np.ndarray:
        return q.T @ (self.offset @ q)
