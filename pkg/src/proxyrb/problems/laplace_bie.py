"""Nystrom discretization of the Laplace double-layer equation on star-shaped
domains with trigonometrically interpolated radial profiles.

The boundary is gamma(theta) = r(theta) (cos theta, sin theta) with r fixed
at N equispaced angles and extended by band-limited Fourier interpolation.
The second-kind system (1/2) I - G is discretized with the periodic
trapezoid rule, which is spectrally accurate for the smooth double-layer
kernel on a closed curve.  The constant 1/2 block is treated as the shared
offset; only the kernel block varies with the sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..oracle import (
    FineSolution,
    OperatorHandle,
    ParameterSample,
    Problem,
    SampleSpace,
)

__all__ = [
    "BieConfig",
    "PolarDomain",
    "BoundaryDiscretization",
    "DegenerateDomainError",
    "LaplaceBieProblem",
    "trig_resample",
]


class DegenerateDomainError(ValueError):
    """The radial interpolant fails positivity on the check grid."""


@dataclass(frozen=True)
class BieConfig:
    """Problem setup: perturbation amplitude, source singularity, and
    quadrature resolutions."""

    kappa: float = 0.4
    x0: tuple[float, float] = (0.6, 0.0)
    n_radial: int = 8
    n_fine: int = 512
    n_coarse: int = 64
    n_samples: int = 256
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        if self.n_coarse >= self.n_fine:
            raise ValueError("coarse quadrature must be smaller than fine")
        if self.n_fine < 16 or self.n_coarse < 16:
            raise ValueError("quadrature counts must be at least 16")


class PolarDomain:
    """Star-shaped domain given by radial values at equispaced angles."""

    # Resolution of the positivity check grid for the radial interpolant.
    _CHECK_GRID = 2048

    def __init__(self, radial_values: np.ndarray, check_positivity: bool = True):
        b = np.asarray(radial_values, dtype=float)
        if b.ndim != 1 or b.size < 2 or b.size % 2 != 0:
            raise ValueError("radial profile needs an even number of nodes >= 2")
        self.radial_values = b
        n = b.size
        c = np.fft.fft(b) / n
        # Real trig interpolant, Nyquist mode as a pure cosine.
        self._a0 = float(c[0].real)
        self._ak = 2.0 * c[1 : n // 2].real
        self._bk = -2.0 * c[1 : n // 2].imag
        self._nyq = float(c[n // 2].real)
        self._k = np.arange(1, n // 2)
        if check_positivity:
            grid = np.linspace(0.0, 2.0 * np.pi, self._CHECK_GRID, endpoint=False)
            if np.min(self.radius(grid)) <= 0.0:
                raise DegenerateDomainError("self-intersecting or degenerate domain")

    def radius(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        kt = np.multiply.outer(theta, self._k)
        r = self._a0 + np.cos(kt) @ self._ak + np.sin(kt) @ self._bk
        nyq = self.radial_values.size // 2
        return r + self._nyq * np.cos(nyq * theta)

    def radius_d1(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        kt = np.multiply.outer(theta, self._k)
        r = -np.sin(kt) @ (self._k * self._ak) + np.cos(kt) @ (self._k * self._bk)
        nyq = self.radial_values.size // 2
        return r - self._nyq * nyq * np.sin(nyq * theta)

    def radius_d2(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        kt = np.multiply.outer(theta, self._k)
        k2 = self._k**2
        r = -np.cos(kt) @ (k2 * self._ak) - np.sin(kt) @ (k2 * self._bk)
        nyq = self.radial_values.size // 2
        return r - self._nyq * nyq**2 * np.cos(nyq * theta)


@dataclass(frozen=True)
class BoundaryDiscretization:
    """Equispaced-in-angle boundary nodes with geometry and trapezoid weights."""

    theta: np.ndarray
    nodes: np.ndarray
    normals: np.ndarray
    speeds: np.ndarray
    curvatures: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.theta.size


def discretize_boundary(domain: PolarDomain, n: int) -> BoundaryDiscretization:
    theta = 2.0 * np.pi * np.arange(n) / n
    r = domain.radius(theta)
    dr = domain.radius_d1(theta)
    ddr = domain.radius_d2(theta)
    ct, st = np.cos(theta), np.sin(theta)
    nodes = np.column_stack([r * ct, r * st])
    tx = dr * ct - r * st
    ty = dr * st + r * ct
    speeds = np.hypot(tx, ty)
    # Counterclockwise parameterization: outward normal is the tangent
    # rotated by -pi/2.
    normals = np.column_stack([ty / speeds, -tx / speeds])
    curvatures = (r**2 + 2.0 * dr**2 - r * ddr) / speeds**3
    weights = (2.0 * np.pi / n) * speeds
    return BoundaryDiscretization(
        theta=theta,
        nodes=nodes,
        normals=normals,
        speeds=speeds,
        curvatures=curvatures,
        weights=weights,
    )


def double_layer_block(disc: BoundaryDiscretization) -> np.ndarray:
    """Nystrom matrix of the double-layer kernel times quadrature weights.

    Off-diagonal entries are K(x_i, x_j) w_j with
    K(x, y) = (1/2pi) (x - y) . n(y) / |x - y|^2; the coincident limit is
    -curvature/(4 pi), validated against a refined-quadrature oracle on the
    unit circle (where every entry equals -1/(4 pi)).
    """
    x = disc.nodes
    diff = x[:, None, :] - x[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(dist2, 1.0)
    dn = np.einsum("ijk,jk->ij", diff, disc.normals)
    kernel = dn / (2.0 * np.pi * dist2)
    np.fill_diagonal(kernel, -disc.curvatures / (4.0 * np.pi))
    return kernel * disc.weights[None, :]


def double_layer_columns(
    disc: BoundaryDiscretization, columns: np.ndarray
) -> np.ndarray:
    """Selected columns of the double-layer block, without full assembly."""
    x = disc.nodes
    y = disc.nodes[columns]
    diff = x[:, None, :] - y[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    dn = np.einsum("ijk,jk->ij", diff, disc.normals[columns])
    for slot, j in enumerate(columns):
        dist2[j, slot] = 1.0
        dn[j, slot] = -disc.curvatures[j] / 2.0
    kernel = dn / (2.0 * np.pi * dist2)
    return kernel * disc.weights[columns][None, :]


def trig_resample(values: np.ndarray, n_to: int) -> np.ndarray:
    """Band-limited resampling between equispaced periodic grids."""
    values = np.asarray(values, dtype=float)
    n_from = values.shape[0]
    spec = np.fft.rfft(values, axis=0)
    out = np.zeros(
        (n_to // 2 + 1,) + spec.shape[1:], dtype=complex
    )
    m = min(spec.shape[0], out.shape[0])
    out[:m] = spec[:m]
    if n_to > n_from and n_from % 2 == 0:
        # The source Nyquist mode becomes an interior mode and would be
        # double-counted by the inverse transform.
        out[n_from // 2] *= 0.5
    elif n_to < n_from and n_to % 2 == 0:
        # Conversely, an interior source mode landing on the target Nyquist
        # is counted only once there; its sine part vanishes at the nodes.
        out[n_to // 2] = 2.0 * out[n_to // 2].real
    return np.fft.irfft(out, n=n_to, axis=0) * (n_to / n_from)


class LaplaceBieProblem(Problem):
    """Double-layer boundary integral equation on random star-shaped domains.

    The operator splits as L = (1/2) I + B with B = -G the negated kernel
    block; the coarse proxy is the same discretization with fewer quadrature
    nodes.  The source f(x) = 1 / |x - x0| is cheap, so the online stage
    projects it directly.
    """

    name = "laplace_bie"
    rhs_mode = "direct"

    def __init__(self, config: BieConfig = BieConfig()):
        self.config = config

    @property
    def fine_dim(self) -> int:
        return self.config.n_fine

    @property
    def coarse_dim(self) -> int:
        return self.config.n_coarse

    @property
    def has_offset(self) -> bool:
        return True

    def sample_space(self) -> SampleSpace:
        rng = np.random.default_rng(self.config.seed)
        b = rng.uniform(
            1.0 - self.config.kappa,
            1.0 + self.config.kappa,
            size=(self.config.n_samples, self.config.n_radial),
        )
        return SampleSpace.from_matrix(b)

    def domain(self, sample: ParameterSample) -> PolarDomain:
        return PolarDomain(sample.coefficients)

    def source_at(self, disc: BoundaryDiscretization) -> np.ndarray:
        x0 = np.asarray(self.config.x0, dtype=float)
        dist = np.linalg.norm(disc.nodes - x0[None, :], axis=1)
        if np.min(dist) <= 1e-10:
            raise DegenerateDomainError("a boundary node coincides with x0")
        return 1.0 / dist

    def _solve_at(self, sample: ParameterSample, n: int) -> np.ndarray:
        disc = discretize_boundary(self.domain(sample), n)
        operator = 0.5 * np.eye(n) - double_layer_block(disc)
        return np.linalg.solve(operator, self.source_at(disc))

    def coarse_solve(self, sample: ParameterSample) -> np.ndarray:
        return self._solve_at(sample, self.config.n_coarse)

    def operator_handle(self, sample: ParameterSample) -> OperatorHandle:
        domain = self.domain(sample)
        n = self.config.n_fine

        def assemble() -> np.ndarray:
            return -double_layer_block(discretize_boundary(domain, n))

        def column(indices: np.ndarray) -> np.ndarray:
            return -double_layer_columns(discretize_boundary(domain, n), indices)

        return OperatorHandle(dim=n, assemble=assemble, column=column, offset=0.5)

    def fine_rhs(self, sample: ParameterSample) -> np.ndarray:
        disc = discretize_boundary(self.domain(sample), self.config.n_fine)
        return self.source_at(disc)

    def fine_solve(self, sample: ParameterSample) -> FineSolution:
        handle = self.operator_handle(sample)
        disc = discretize_boundary(self.domain(sample), self.config.n_fine)
        operator = 0.5 * np.eye(self.config.n_fine) - double_layer_block(disc)
        rhs = self.source_at(disc)
        u = np.linalg.solve(operator, rhs)
        return FineSolution(solution=u, rhs=rhs, handle=handle)

    def offset_project(self, q: np.ndarray) -> np.ndarray:
        return 0.5 * np.eye(q.shape[1])
