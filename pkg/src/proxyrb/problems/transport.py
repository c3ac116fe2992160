"""Collocation discretization of the radiative-transport integral equation
on the unit square with Gaussian-parameterized media.

The unknown is u = mu_s * m (scattering coefficient times local mean
density).  The operator splits as L = I + B where B discretizes the
scattering term - mu_s(x) K, with the attenuation kernel

    K(x, y) = (1 / 2 pi |x - y|) exp(-|x - y| * integral of mu_t along
              the segment from x to y),

the line integral evaluated by Gauss-Legendre quadrature.  Collocation
points are a tensor Gauss-Legendre grid on [0, 1]^2; the singular self-cell
uses a closed-form polar integration of 1/r over a square cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..oracle import (
    FineSolution,
    OperatorHandle,
    ParameterSample,
    Problem,
    SampleSpace,
)

__all__ = [
    "RteMedium",
    "RteConfig",
    "RteDiscretization",
    "TransportProblem",
    "attenuation_kernel",
    "kernel_block",
    "assemble_varying",
    "source_term",
    "build_parameter_grid",
    "gauss_grid",
]

# integral of 1/r over a unit square centered at the origin
_SQUARE_SELF_INTEGRAL = 4.0 * np.log(1.0 + np.sqrt(2.0))


@dataclass(frozen=True)
class RteMedium:
    """Gaussian bump medium: mu_t = mu_s = 1 + A exp(-d(x)/theta^2).

    ``gaussian_sign`` selects the sign between the squared terms in d(x):
    "+" gives the isotropic bump (default), "-" the saddle variant.
    """

    amplitude: float
    center: tuple[float, float]
    width: float
    gaussian_sign: str = "+"

    def __post_init__(self):
        if self.width <= 0.0:
            raise ValueError(f"width must be positive, got {self.width}")
        if self.gaussian_sign not in ("+", "-"):
            raise ValueError(f"gaussian_sign must be '+' or '-'")

    def mu(self, points: np.ndarray) -> np.ndarray:
        """Transport/scattering coefficient at points of shape (..., 2)."""
        points = np.asarray(points, dtype=float)
        d1 = (points[..., 0] - self.center[0]) ** 2
        d2 = (points[..., 1] - self.center[1]) ** 2
        d = d1 + d2 if self.gaussian_sign == "+" else d1 - d2
        return 1.0 + self.amplitude * np.exp(-d / self.width**2)


@dataclass(frozen=True)
class RteConfig:
    """Grid resolutions (points per side) and parameter-grid specification."""

    n_fine: int = 32
    n_coarse: int = 16
    grid_n: int = 6
    amplitudes: tuple[float, ...] = (2.0, 6.0, 10.0)
    widths: tuple[float, ...] = (0.2, 0.4, 0.6)
    line_quadrature: int = 16
    gaussian_sign: str = "+"

    def __post_init__(self):
        if self.n_coarse >= self.n_fine:
            raise ValueError("coarse grid must be smaller than fine grid")
        if self.line_quadrature < 4:
            raise ValueError("line quadrature order must be at least 4")


@dataclass(frozen=True)
class RteDiscretization:
    """Tensor Gauss-Legendre collocation grid on [0, 1]^2."""

    points: np.ndarray
    weights: np.ndarray
    source: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size


def gauss_grid(n_side: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product Gauss-Legendre points and weights mapped to [0, 1]^2."""
    x, w = np.polynomial.legendre.leggauss(n_side)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    xx, yy = np.meshgrid(x, x, indexing="ij")
    points = np.column_stack([xx.ravel(), yy.ravel()])
    weights = np.outer(w, w).ravel()
    return points, weights


def source_term(points: np.ndarray) -> np.ndarray:
    """Light source g(x), a narrow Gaussian at the domain center."""
    d = (points[..., 0] - 0.5) ** 2 + (points[..., 1] - 0.5) ** 2
    return np.exp(-256.0 * d)


@lru_cache(maxsize=8)
def _cached_discretization(n_side: int) -> RteDiscretization:
    points, weights = gauss_grid(n_side)
    return RteDiscretization(points=points, weights=weights, source=source_term(points))


def _line_nodes(q: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (t + 1.0), 0.5 * w


def _segment_attenuation(
    x: np.ndarray, y: np.ndarray, medium: RteMedium, q: int
) -> np.ndarray:
    """Gauss-Legendre approximation of the mu_t line integral from x to y.

    ``x`` and ``y`` broadcast against each other over shape (..., 2).
    """
    t, w = _line_nodes(q)
    d = x - y
    total = np.zeros(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))
    for tau, wt in zip(t, w):
        total = total + wt * medium.mu(x - tau * d)
    return total


def attenuation_kernel(x, y, medium: RteMedium, q: int = 16):
    """Kernel combining 1/(2 pi r) spreading with attenuation along the ray."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = np.linalg.norm(
        np.asarray(x) - np.asarray(y), axis=-1
    )
    if np.any(dist == 0.0):
        raise ValueError("kernel is singular at x == y")
    line = _segment_attenuation(x, y, medium, q)
    return np.exp(-dist * line) / (2.0 * np.pi * dist)


def kernel_block(
    targets: np.ndarray, sources: np.ndarray, medium: RteMedium, q: int
) -> np.ndarray:
    """Kernel matrix K(targets_i, sources_j); coincident pairs left at 0."""
    diff = targets[:, None, :] - sources[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    t, w = _line_nodes(q)
    line = np.zeros_like(dist)
    for tau, wt in zip(t, w):
        pts = targets[:, None, :] - tau * diff
        line += wt * medium.mu(pts)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.exp(-dist * line) / (2.0 * np.pi * dist)
    k[dist == 0.0] = 0.0
    return k


def _self_cell(medium: RteMedium, disc: RteDiscretization) -> np.ndarray:
    """Singular diagonal: 1/(2 pi r) integrated over a square cell of the
    local quadrature area, attenuation taken at zero distance (= 1)."""
    h = np.sqrt(disc.weights)
    return h * _SQUARE_SELF_INTEGRAL / (2.0 * np.pi)


def assemble_varying(medium: RteMedium, disc: RteDiscretization, q: int) -> np.ndarray:
    """Dense varying part B with entries -mu_s(x_i) K(x_i, x_j) w_j."""
    k = kernel_block(disc.points, disc.points, medium, q)
    kw = k * disc.weights[None, :]
    np.fill_diagonal(kw, _self_cell(medium, disc))
    return -medium.mu(disc.points)[:, None] * kw


def varying_columns(
    medium: RteMedium, disc: RteDiscretization, columns: np.ndarray, q: int
) -> np.ndarray:
    k = kernel_block(disc.points, disc.points[columns], medium, q)
    kw = k * disc.weights[columns][None, :]
    diag = _self_cell(medium, disc)
    for slot, j in enumerate(columns):
        kw[j, slot] = diag[j]
    return -medium.mu(disc.points)[:, None] * kw


def build_parameter_grid(config: RteConfig) -> SampleSpace:
    """Cartesian grid over amplitudes, widths, and Gaussian centers (i/N, j/N)."""
    n = config.grid_n
    rows = [
        [a, i / n, j / n, th]
        for a in config.amplitudes
        for th in config.widths
        for i in range(n + 1)
        for j in range(n + 1)
    ]
    return SampleSpace.from_matrix(np.array(rows))


class TransportProblem(Problem):
    """Radiative-transport integral equation with offset-form interpolation.

    The identity offset is shared by every sample; the right-hand side
    f = -B g involves the operator itself, so the online stage interpolates
    stored skeleton right-hand sides with the operator mixing weights.
    """

    name = "rte"
    rhs_mode = "interpolated"

    def __init__(self, config: RteConfig = RteConfig()):
        self.config = config

    @property
    def fine_dim(self) -> int:
        return self.config.n_fine**2

    @property
    def coarse_dim(self) -> int:
        return self.config.n_coarse**2

    @property
    def has_offset(self) -> bool:
        return True

    def sample_space(self) -> SampleSpace:
        return build_parameter_grid(self.config)

    def medium(self, sample: ParameterSample) -> RteMedium:
        a, c1, c2, th = sample.coefficients
        return RteMedium(
            amplitude=float(a),
            center=(float(c1), float(c2)),
            width=float(th),
            gaussian_sign=self.config.gaussian_sign,
        )

    def _fine_disc(self) -> RteDiscretization:
        return _cached_discretization(self.config.n_fine)

    def coarse_solve(self, sample: ParameterSample) -> np.ndarray:
        disc = _cached_discretization(self.config.n_coarse)
        b = assemble_varying(self.medium(sample), disc, self.config.line_quadrature)
        operator = np.eye(disc.size) + b
        return np.linalg.solve(operator, -b @ disc.source)

    def operator_handle(self, sample: ParameterSample) -> OperatorHandle:
        medium = self.medium(sample)
        disc = self._fine_disc()
        q = self.config.line_quadrature

        def assemble() -> np.ndarray:
            return assemble_varying(medium, disc, q)

        def column(indices: np.ndarray) -> np.ndarray:
            return varying_columns(medium, disc, indices, q)

        return OperatorHandle(dim=disc.size, assemble=assemble, column=column, offset=1.0)

    def fine_rhs(self, sample: ParameterSample) -> np.ndarray:
        disc = self._fine_disc()
        b = assemble_varying(
            self.medium(sample), disc, self.config.line_quadrature
        )
        return -b @ disc.source

    def fine_solve(self, sample: ParameterSample) -> FineSolution:
        handle = self.operator_handle(sample)
        disc = self._fine_disc()
        b = assemble_varying(self.medium(sample), disc, self.config.line_quadrature)
        rhs = -b @ disc.source
        u = np.linalg.solve(np.eye(disc.size) + b, rhs)
        return FineSolution(solution=u, rhs=rhs, handle=handle)

    def offset_project(self, q: np.ndarray) -> np.ndarray:
        return np.eye(q.shape[1])
