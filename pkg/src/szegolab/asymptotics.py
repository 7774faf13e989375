"""Scaling asymptotics of equivariant kernels near the cone locus.

At a locus point ``x`` with horizontal displacements ``w``, ``v`` (coordinates
in the horizontal frame) the kernel is expected to behave like

    Pi_{k nu}(x + w/sqrt(k), x + v/sqrt(k))
        ~ Psi (k / (varsigma pi))^{d + (1 - r)/2} exp(psi2(w, v) / varsigma),

with ``psi2(w, v) = -i omega(w, v) - |w - v|^2 / 2``.  This module evaluates
both sides and fits exponents, constants and remainder rates over k-sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from math import pi

import numpy as np
from scipy import integrate

from .hardy import IsotypeBasis, equivariant_kernel
from .model_geometry import chart_point
from .reduction import ReductionPointData

__all__ = [
    "ConvergenceReport",
    "ProfileReport",
    "psi2",
    "leading_term",
    "displaced_points",
    "rescaled_kernel",
    "gaussian_factor",
    "gaussian_integrand",
    "gaussian_factor_quadrature",
    "loglog_fit",
    "convergence_report",
    "profile_report",
    "R2_GATE",
]

R2_GATE = 0.99


def psi2(w, v) -> complex:
    """``-i omega(w, v) - |w - v|^2 / 2`` for the standard structures on ``C^n``.

    Equals ``w . conj(v) - |w|^2/2 - |v|^2/2``.
    """
    w = np.asarray(w, dtype=complex)
    v = np.asarray(v, dtype=complex)
    omega = np.imag(np.sum(np.conj(w) * v, axis=-1))
    return -1j * omega - 0.5 * np.sum(np.abs(w - v) ** 2, axis=-1)


def leading_term(data: ReductionPointData, w, v, k) -> complex:
    """``Psi (k / (varsigma pi))^{d + (1-r)/2} exp(psi2(w, v) / varsigma)``."""
    k = np.asarray(k, dtype=float)
    s = data.varsigma
    return data.psi_value * (k / (s * pi)) ** data.leading_exponent * np.exp(psi2(w, v) / s)


def displaced_points(data: ReductionPointData, w, k):
    """``x + w / sqrt(k)`` for horizontal-frame coordinates ``w``."""
    w = np.asarray(w, dtype=complex)
    return chart_point(data.chart, (w / np.sqrt(k)) @ data.horizontal_frame.T)


def rescaled_kernel(basis: IsotypeBasis, data: ReductionPointData, w, v,
                    C: float = 2.0, eps: float = 0.15) -> complex:
    """``Pi_{k nu}(x + w/sqrt(k), x + v/sqrt(k))`` with the window ``|w|, |v| <= C k^eps``."""
    k = basis.k
    if not 0 < eps < 1 / 6:
        raise ValueError("eps must lie in (0, 1/6)")
    lim = C * k**eps
    if np.linalg.norm(w) > lim or np.linalg.norm(v) > lim:
        raise ValueError(f"displacement outside the window |w|, |v| <= {lim:.3g}")
    return complex(equivariant_kernel(basis, displaced_points(data, w, k), displaced_points(data, v, k)))


def gaussian_factor(data: ReductionPointData, v=None, w=None) -> float:
    """Closed form ``(2 pi varsigma)^{(r-1)/2} / sqrt(det D)`` of the Gaussian
    integral over ``t0``; the linear terms vanish for horizontal ``v``, ``w``."""
    r1 = data.t0_basis.shape[1]
    if r1 == 0:
        return 1.0
    return float((2 * pi * data.varsigma) ** (r1 / 2) / np.sqrt(np.linalg.det(data.D_matrix)))


def gaussian_integrand(data: ReductionPointData, v, w):
    """Integrand on ``t0`` (coordinates in the phi-orthonormal basis) with
    chart-coordinate tangent vectors ``v``, ``w``."""
    v = np.asarray(v, dtype=complex)
    w = np.asarray(w, dtype=complex)
    s = data.varsigma

    def f(t):
        xi_m = data.val_t0 @ np.atleast_1d(t)
        g = np.real(np.vdot(xi_m, v - w))
        om = np.imag(np.vdot(xi_m, v + w))
        return np.exp((g + 1j * om - 0.5 * np.vdot(xi_m, xi_m).real) / s)

    return f


def gaussian_factor_quadrature(data: ReductionPointData, v=None, w=None) -> complex:
    """Adaptive quadrature of the integrand over ``t0`` (``r_G <= 2``)."""
    r1 = data.t0_basis.shape[1]
    d = data.d
    v = np.zeros(d, complex) if v is None else np.asarray(v, dtype=complex)
    w = np.zeros(d, complex) if w is None else np.asarray(w, dtype=complex)
    if r1 == 0:
        return 1.0 + 0j
    if r1 > 1:
        raise NotImplementedError("quadrature oracle implemented for one-dimensional t0")
    f = gaussian_integrand(data, v, w)
    re = integrate.quad(lambda t: f(t).real, -np.inf, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    # the imaginary part can vanish, so it gets an absolute floor tied to the real part
    floor = 1e-13 * max(abs(re), 1e-300)
    im = integrate.quad(lambda t: f(t).imag, -np.inf, np.inf, epsabs=floor, epsrel=1e-12, limit=200)[0]
    return re + 1j * im


def loglog_fit(k, y):
    """OLS of ``log y`` against ``log k``: ``(slope, intercept, r_squared)``."""
    lk = np.log(np.asarray(k, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    A = np.vstack([lk, np.ones_like(lk)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(coef[0]), float(coef[1]), float(r2)


@dataclass
class ConvergenceReport:
    """Fit of a k-sweep of kernel values against the leading term."""

    k_grid: list
    observed: list
    predicted: list
    fitted_exponent: float
    fitted_log_constant: float
    remainder_rate: float
    r_squared: float
    target_exponent: float
    target_log_constant: float
    pinned_log_constant: float
    haar: str = "probability"
    fit_ok: bool = True

    @property
    def exponent_error(self) -> float:
        return abs(self.fitted_exponent - self.target_exponent)

    @property
    def constant_relative_error(self) -> float:
        return abs(self.fitted_log_constant - self.target_log_constant) / abs(self.target_log_constant)

    @property
    def ratios(self) -> np.ndarray:
        return np.abs(np.asarray(self.observed) / np.asarray(self.predicted))

    def summary(self) -> dict:
        out = asdict(self)
        out["observed"] = [complex(z) for z in self.observed]
        out["predicted"] = [complex(z) for z in self.predicted]
        out["exponent_error"] = self.exponent_error
        out["constant_relative_error"] = self.constant_relative_error
        return out


def _check_grid(k_grid):
    k = [int(x) for x in k_grid]
    if len(k) < 4 or any(b <= a for a, b in zip(k, k[1:])):
        raise ValueError("k_grid must be strictly increasing with at least 4 entries")
    return k


def convergence_report(basis_factory, data: ReductionPointData, w=None, v=None, k_grid=(64, 128, 256, 512, 1024),
                       haar: str = "probability") -> ConvergenceReport:
    """Sweep ``k`` and fit ``log|Pi_{k nu}(x + w/sqrt k, x + v/sqrt k)| = alpha log k + beta``.

    ``basis_factory(k)`` returns the isotype basis at ``k``.  The targets are
    ``alpha = d + (1 - r)/2`` and ``beta = log(Psi / (varsigma pi)^alpha)``
    (plus ``Re psi2/varsigma`` off the diagonal).  ``haar="phi"`` rescales the
    observed values by ``vol(G)``, the kernel obtained when the projector
    integral uses the Riemannian Haar volume.  The remainder rate is minus the
    log-log slope of ``|observed/predicted - 1|``.  ``pinned_log_constant`` is
    the mean of ``log|observed| - alpha_target log k``.
    """
    k_grid = _check_grid(k_grid)
    d = data.d
    w = np.zeros(data.horizontal_dim, complex) if w is None else np.asarray(w, dtype=complex)
    v = np.zeros(data.horizontal_dim, complex) if v is None else np.asarray(v, dtype=complex)
    scale = data.group.volume_G if haar == "phi" else 1.0
    obs, pred = [], []
    for k in k_grid:
        basis = basis_factory(k)
        obs.append(scale * rescaled_kernel(basis, data, w, v))
        pred.append(leading_term(data, w, v, k))
    obs = np.array(obs)
    pred = np.array(pred)
    slope, icpt, r2 = loglog_fit(k_grid, np.abs(obs))
    rem = np.abs(obs / pred - 1)
    rate = -loglog_fit(k_grid, np.maximum(rem, 1e-300))[0]
    e = data.leading_exponent
    target_beta = float(np.log(data.psi_value / (data.varsigma * pi) ** e) + np.real(psi2(w, v)) / data.varsigma)
    pinned = float(np.mean(np.log(np.abs(obs)) - e * np.log(k_grid)))
    return ConvergenceReport(
        k_grid=list(k_grid), observed=list(obs), predicted=list(pred), fitted_exponent=slope,
        fitted_log_constant=icpt, remainder_rate=rate, r_squared=r2, target_exponent=e,
        target_log_constant=target_beta, pinned_log_constant=pinned, haar=haar, fit_ok=r2 >= R2_GATE,
    )


@dataclass
class ProfileReport:
    """Decay of ``|Pi(x+w, x+v)/Pi(x, x) - exp(psi2(w, v)/varsigma)|`` along a k-grid."""

    k_grid: list
    ratios: list
    target: complex
    errors: list
    rate: float
    r_squared: float

    @property
    def decreasing(self) -> bool:
        e = self.errors
        return all(b < a for a, b in zip(e, e[1:]))


def profile_report(basis_factory, data: ReductionPointData, w, v, k_grid=(64, 128, 256, 512, 1024)) -> ProfileReport:
    k_grid = _check_grid(k_grid)
    w = np.asarray(w, dtype=complex)
    v = np.asarray(v, dtype=complex)
    target = complex(np.exp(psi2(w, v) / data.varsigma))
    ratios, errs = [], []
    zero = np.zeros_like(w)
    for k in k_grid:
        basis = basis_factory(k)
        q = rescaled_kernel(basis, data, w, v) / rescaled_kernel(basis, data, zero, zero)
        ratios.append(q)
        errs.append(abs(q - target))
    slope, _, r2 = loglog_fit(k_grid, errs)
    return ProfileReport(list(k_grid), ratios, target, errs, -slope, r2)
