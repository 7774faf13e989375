"""Maps into isotype duals and the checks of asymptotic isometric minimality.

``phi_{k nu}(x) = k^{-(d + (1-r)/2)} (conj(s_j(x)))_j`` for an orthonormal
isotype basis ``(s_j)``; its squared norm is the scaled diagonal kernel.  The
round-metric and minimality checks use the normalized map
``f = phi / |phi|`` into the unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .hardy import IsotypeBasis, basis_values, equivariant_kernel
from .model_geometry import chart_point
from .reduction import ReductionPointData
from .asymptotics import loglog_fit

__all__ = [
    "ImmersionSample",
    "IsometryReport",
    "LaplacianResult",
    "phi_map",
    "normalized_map",
    "pullback_metric",
    "isometry_report",
    "laplacian_check",
    "laplacian_report",
    "minimality_oracle",
    "immersion_sample",
    "target_eigenvalue",
]


def _exponent(basis: IsotypeBasis) -> float:
    return basis.model.d + (1 - basis.action.group.rank) / 2


def target_eigenvalue(data: ReductionPointData) -> float:
    """``-(2d - 2 r_G + 2)``."""
    return -float(2 * data.d - 2 * data.r + 2)


def phi_map(basis: IsotypeBasis, x) -> np.ndarray:
    """Coefficient vector ``k^{-(d + (1-r)/2)} conj(s_j(x))``; batched over points."""
    x = np.asarray(x, dtype=complex)
    if basis.dimension == 0:
        raise ValueError("the isotype is zero; the map is undefined")
    vals = np.conj(basis_values(basis, x)) * basis.k ** (-_exponent(basis))
    nrm = np.linalg.norm(vals, axis=-1)
    if np.any(nrm == 0):
        raise ValueError("the point lies in the base locus of the isotype; the map is undefined there")
    return vals[0] if x.ndim == 1 else vals


def normalized_map(basis: IsotypeBasis, x) -> np.ndarray:
    v = phi_map(basis, x)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _log_ratio_kernel(basis, data, variant):
    x0 = data.point
    diag = equivariant_kernel(basis, x0, x0).real
    if not diag > 0:
        raise ValueError("diagonal kernel vanishes at the point")
    H = data.horizontal_frame
    chart = data.chart

    def F(w, v):
        xw = chart_point(chart, H @ w)
        xv = chart_point(chart, H @ v)
        val = equivariant_kernel(basis, xw, xv) / diag
        if variant == "log":
            if abs(val) < 1e-12:
                raise ValueError("finite-difference stencil reached the kernel zero set")
            return np.log(val)
        return val

    return F


def _mixed_wirtinger(F, n, h):
    """``d/dw_a d/dconj(v_b) F`` at 0 by central differences with step ``h``."""
    P = np.zeros((n, n), dtype=complex)
    units = (1.0, 1j)
    for a in range(n):
        for b in range(n):
            D = np.zeros((2, 2), dtype=complex)
            for i, uw in enumerate(units):
                for j, uv in enumerate(units):
                    ew = np.zeros(n, complex)
                    ev = np.zeros(n, complex)
                    ew[a] = uw * h
                    ev[b] = uv * h
                    D[i, j] = (F(ew, ev) - F(ew, -ev) - F(-ew, ev) + F(-ew, -ev)) / (4 * h * h)
            P[a, b] = 0.25 * (D[0, 0] + 1j * D[0, 1] - 1j * D[1, 0] + D[1, 1])
    return P


def pullback_metric(data: ReductionPointData, basis: IsotypeBasis, h: float = None, variant: str = "log",
                    richardson: bool = True) -> np.ndarray:
    """Hermitian matrix ``(1/k) d_{w_a} d_{conj(v_b)} log Pi_{k nu}(x + w, x + v)`` at ``w = v = 0``.

    Coordinates are horizontal-frame coordinates at unit chart scale; the
    default step is ``0.1 / sqrt(k)``.  ``variant="raw"`` differentiates
    ``Pi(x + w, x + v)/Pi(x, x)`` instead of its logarithm.  The matrix is
    compared with ``g2`` in Hermitian form, ``I / varsigma`` for a unitary frame.
    """
    if variant not in ("log", "raw"):
        raise ValueError("variant must be 'log' or 'raw'")
    k = basis.k
    h = 0.1 / np.sqrt(k) if h is None else h
    F = _log_ratio_kernel(basis, data, variant)
    n = data.horizontal_dim
    P = _mixed_wirtinger(F, n, h)
    if richardson:
        P = (4 * _mixed_wirtinger(F, n, h / 2) - P) / 3
    return P / k


@dataclass
class IsometryReport:
    k_grid: list
    metrics: list
    g2: np.ndarray
    deviations: list
    ratios: list
    epsilon: float
    min_singular_values: list
    immersion_threshold: float
    k_star: int
    hermitian_residuals: list

    @property
    def strictly_decreasing(self) -> bool:
        return all(r < 1 for r in self.ratios)

    def ratio_ok(self, bound: float = 0.8) -> bool:
        return all(r <= bound for r in self.ratios)

    def summary(self) -> dict:
        return {
            "k_grid": self.k_grid,
            "deviations": self.deviations,
            "ratios": self.ratios,
            "epsilon": self.epsilon,
            "min_singular_values": self.min_singular_values,
            "immersion_threshold": self.immersion_threshold,
            "k_star": self.k_star,
            "strictly_decreasing": self.strictly_decreasing,
        }


def isometry_report(data: ReductionPointData, basis_factory, k_grid=(64, 128, 256, 512, 1024),
                    variant: str = "log") -> IsometryReport:
    """Relative Frobenius deviation of the pullback metric from ``g2`` over ``k``."""
    k_grid = [int(k) for k in k_grid]
    if len(k_grid) < 4:
        raise ValueError("k_grid needs at least 4 entries")
    g2 = data.g2_hermitian
    mets, devs, svs, herm = [], [], [], []
    for k in k_grid:
        P = pullback_metric(data, basis_factory(k), variant=variant)
        herm.append(float(np.linalg.norm(P - P.conj().T)))
        Ph = 0.5 * (P + P.conj().T)
        mets.append(Ph)
        devs.append(float(np.linalg.norm(Ph - g2) / np.linalg.norm(g2)))
        svs.append(float(np.sqrt(max(np.linalg.eigvalsh(Ph).min(), 0.0))))
    ratios = [b / a for a, b in zip(devs, devs[1:])]
    eps = -loglog_fit(k_grid, devs)[0]
    thr = 0.5 * np.sqrt(np.linalg.eigvalsh(g2).min())
    k_star = -1
    for i in range(len(k_grid)):
        if all(s > thr for s in svs[i:]):
            k_star = k_grid[i]
            break
    return IsometryReport(k_grid, mets, g2, devs, ratios, eps, svs, float(thr), k_star, herm)


@dataclass
class LaplacianResult:
    k: int
    eigen_estimate: float
    residual_norm: float
    target: float
    laplacian_value: np.ndarray = field(repr=False, default=None)


def laplacian_check(data: ReductionPointData, basis: IsotypeBasis, h_u: float = 0.1,
                    richardson: bool = True) -> LaplacianResult:
    """``varsigma`` times the flat horizontal Laplacian of the normalized map.

    Derivatives are taken in rescaled coordinates ``u = sqrt(k) y`` with step
    ``h_u`` (i.e. ``0.1 / sqrt(k)`` in the chart), so the result approximates
    ``k^{-1} Delta_2 f``.  Returns the Rayleigh quotient ``Re <Delta f, f>`` and
    ``|Delta f + m f|`` with ``m = 2d - 2 r_G + 2``.
    """
    k = basis.k
    H = data.horizontal_frame
    n = data.horizontal_dim
    dirs = [H[:, a] for a in range(n)] + [1j * H[:, a] for a in range(n)]

    def f(y):
        return normalized_map(basis, chart_point(data.chart, y))

    f0 = f(np.zeros(data.d, complex))

    def second(hh):
        tot = np.zeros_like(f0)
        for e in dirs:
            step = e * hh / np.sqrt(k)
            tot += (f(step) - 2 * f0 + f(-step)) / hh**2
        return tot

    lap = second(h_u)
    if richardson:
        lap = (4 * second(h_u / 2) - lap) / 3
    lap = data.varsigma * lap
    m = -target_eigenvalue(data)
    eig = float(np.real(np.vdot(f0, lap)))
    res = float(np.linalg.norm(lap + m * f0))
    return LaplacianResult(k, eig, res, -m, lap)


def laplacian_report(data: ReductionPointData, basis_factory, k_grid) -> list:
    return [laplacian_check(data, basis_factory(k)) for k in k_grid]


def minimality_oracle(dimension: float, eigen_estimate: float, tol: float = 0.2) -> bool:
    """``Delta f = -m f`` test: ``|eigen_estimate + m| < tol``."""
    return bool(abs(eigen_estimate + dimension) < tol)


@dataclass
class ImmersionSample:
    point_data: ReductionPointData
    k: int
    coefficient_vector: np.ndarray
    normalized_vector: np.ndarray
    pullback_metric: np.ndarray
    laplacian_value: np.ndarray
    target_eigenvalue: float


def immersion_sample(data: ReductionPointData, basis: IsotypeBasis) -> ImmersionSample:
    c = phi_map(basis, data.point)
    lap = laplacian_check(data, basis)
    return ImmersionSample(data, basis.k, c, c / np.linalg.norm(c), pullback_metric(data, basis),
                           lap.laplacian_value, target_eigenvalue(data))
