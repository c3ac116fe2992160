"""Shared toy problem family for pipeline tests."""

import numpy as np

from proxyrb.oracle import OperatorHandle, Problem, SampleSpace


class ToyProblem(Problem):
    """Small affine family L(w) = offset + B(w) with B(w) = B0 + w*B1.

    The coarse solve returns [1, w, w^2] so that CPQR on the coarse sweep
    has a nontrivial ranking; the fine right-hand side is (1+w)*ones.
    """

    name = "toy"

    def __init__(self, n=6, p=9, offset=None, seed=0):
        self._n = n
        self._p = p
        self._offset = offset
        rng = np.random.default_rng(seed)
        self._b0 = np.eye(n) * 2.0 + rng.standard_normal((n, n)) / (2 * n)
        self._b1 = rng.standard_normal((n, n)) / n

    @property
    def fine_dim(self):
        return self._n

    @property
    def coarse_dim(self):
        return 3

    @property
    def has_offset(self):
        return self._offset is not None

    def sample_space(self):
        return SampleSpace.from_matrix(np.linspace(0.0, 1.0, self._p)[:, None])

    def coarse_solve(self, sample):
        w = sample.coefficients[0]
        return np.array([1.0, w, w * w])

    def _varying(self, sample):
        w = sample.coefficients[0]
        b = w * self._b1
        if self._offset is None:
            b = b + self._b0
        return b

    def operator_handle(self, sample):
        b = self._varying(sample)
        return OperatorHandle(
            dim=self._n,
            assemble=lambda: b,
            column=lambda idx: b[:, idx],
            offset=self._offset,
        )

    def fine_rhs(self, sample):
        return (1.0 + sample.coefficients[0]) * np.ones(self._n)
