"""Points of the cone locus ``Phi^{-1}(R_+ O_nu)`` and the reduced structures there.

All tangent data live in the Heisenberg chart at the point: a tangent vector
of ``M`` is a complex vector ``v`` in ``C^d`` and its real form is
``(Re v, Im v)``.  In these coordinates ``g`` is Euclidean, ``J`` is
multiplication by ``i`` and ``omega(a, b) = Im(conj(a) . b)``.

``val(xi)`` is the chart image of the fundamental field ``xi_M``; with the
moment convention of :mod:`szegolab.model_geometry` the differential of the
moment map is ``d<Phi, xi>(v) = 2 omega(val(xi), v)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd, pi
from itertools import combinations

import numpy as np
from scipy.linalg import null_space, subspace_angles

from . import lie_groups as lg
from .model_geometry import (
    LinearAction,
    HeisenbergChart,
    act,
    bundle_distance,
    chart_point,
    generator,
    heisenberg_chart,
    moment_map,
    normalize_point,
)

__all__ = [
    "ReductionPointData",
    "LocusSolverError",
    "NotFreeError",
    "locus_point",
    "evaluation_map",
    "moment_differential",
    "moment_differential_fd",
    "transversality_margin",
    "is_transverse",
    "psi_nu",
    "reduced_metrics",
    "characteristic_leaf_tangent",
    "locus_tangent",
    "splitting_residuals",
    "align_element",
    "leaf_curve",
    "circle_period_residual",
    "distance_ratio",
    "locus_scan",
    "STANDARD_OMEGA",
]

NON_TRANSVERSE = 1e-8


class LocusSolverError(RuntimeError):
    """The cone-locus solver did not converge."""


class NotFreeError(RuntimeError):
    """The group does not act freely at the point."""


def STANDARD_OMEGA(n: int) -> np.ndarray:
    """Matrix of ``omega(a, b) = Im(conj(a) . b)`` in real coordinates ``(Re, Im)``."""
    Z, I = np.zeros((n, n)), np.eye(n)
    return np.block([[Z, I], [-I, Z]])


def _real(v: np.ndarray) -> np.ndarray:
    """Complex ``d x m`` columns to real ``2d x m``."""
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag], axis=0)


def _complex(r: np.ndarray) -> np.ndarray:
    d = r.shape[0] // 2
    return r[:d] + 1j * r[d:]


@dataclass(frozen=True)
class ReductionPointData:
    """A point of the cone locus with its frames and scalars.

    Frames are in chart coordinates.  ``horizontal_frame`` is a complex
    ``d x d'`` matrix with orthonormal columns (``d' = d - r_G + 1``);
    ``perp_frame`` and ``normal_frame`` are real ``2d x (r_G - 1)``;
    ``t0_basis`` holds ``phi``-orthonormal Lie algebra vectors as columns.
    ``g1``, ``omega1``, ``g2``, ``omega2`` are real ``2d' x 2d'`` matrices in the
    real horizontal basis ``(h_1..h_d', i h_1..i h_d')``.
    """

    action: LinearAction
    nu: lg.WeightVector
    point: np.ndarray
    chart: HeisenbergChart
    moment: np.ndarray
    varsigma: float
    align_element: np.ndarray
    t0_basis: np.ndarray
    val_t0: np.ndarray
    horizontal_frame: np.ndarray
    perp_frame: np.ndarray
    normal_frame: np.ndarray
    D_matrix: np.ndarray
    psi_value: float
    g1: np.ndarray
    omega1: np.ndarray
    g2: np.ndarray
    omega2: np.ndarray
    orbit: lg.CoadjointOrbitData
    cone_residual: float
    free: bool
    iterations: int = 0

    @property
    def model(self):
        return self.action.model

    @property
    def group(self):
        return self.action.group

    @property
    def d(self) -> int:
        return self.action.model.d

    @property
    def r(self) -> int:
        return self.action.group.rank

    @property
    def horizontal_dim(self) -> int:
        return self.horizontal_frame.shape[1]

    @property
    def horizontal_real(self) -> np.ndarray:
        H = self.horizontal_frame
        return _real(np.hstack([H, 1j * H]))

    @property
    def g2_hermitian(self) -> np.ndarray:
        """``g2`` as the Hermitian matrix ``h`` with ``g2(a, b) = Re(a^T h conj(b))``."""
        H = self.horizontal_frame
        return (H.T @ np.conj(H)) / self.varsigma

    @property
    def leading_exponent(self) -> float:
        return self.d + (1 - self.r) / 2


def evaluation_map(action: LinearAction, chart: HeisenbergChart) -> np.ndarray:
    """Complex ``d x dim g`` matrix whose column ``a`` is ``val(e_a)``."""
    F = chart.horizontal_frame
    Ax = np.einsum("aij,j->ia", action.generators, chart.center)
    return np.conj(F.T) @ Ax


def moment_differential(action: LinearAction, chart: HeisenbergChart) -> np.ndarray:
    """Real ``dim g x 2d`` matrix of ``dPhi`` in chart coordinates (analytic)."""
    V = evaluation_map(action, chart)
    return 2 * np.hstack([-V.imag.T, V.real.T])


def moment_differential_fd(action: LinearAction, chart: HeisenbergChart, h: float = 1e-5) -> np.ndarray:
    """Central-difference ``dPhi`` in chart coordinates."""
    d = action.model.d
    cols = []
    for j in range(2 * d):
        e = np.zeros(2 * d)
        e[j] = h
        v = e[:d] + 1j * e[d:]
        cols.append((moment_map(action, chart_point(chart, v)) - moment_map(action, chart_point(chart, -v))) / (2 * h))
    return np.array(cols).T


def _cone_projector(action: LinearAction, nu: lg.WeightVector) -> np.ndarray:
    """Rows spanning the orthogonal complement of ``nu`` (torus only)."""
    v = nu.covector
    return null_space(v[None, :]).T


def _is_free(action: LinearAction, x: np.ndarray) -> bool:
    """Free action at ``x`` in ``X``: injective infinitesimal action and, for tori,
    trivial stabilizer lattice."""
    Ax = np.einsum("aij,j->ia", action.generators, x)
    s = np.linalg.svd(_real(Ax), compute_uv=False)
    if s.min() < 1e-8:
        return False
    if not action.group.is_torus:
        return True
    # stabilizer of a Segre point: angles killing every product of nonzero coordinates
    model = action.model
    W = action.weight_matrix
    sums = np.zeros((1, action.group.rank), dtype=np.int64)
    for blk in model.blocks:
        idx = [c for c in range(blk.start, blk.stop) if abs(x[c]) > 1e-12]
        sums = (sums[:, None, :] + np.rint(W[idx]).astype(np.int64)[None, :, :]).reshape(-1, action.group.rank)
    return _lattice_index(sums) == 1


def _lattice_index(V: np.ndarray) -> int:
    """Index in ``Z^r`` of the lattice spanned by the rows of ``V`` (0 if not full rank)."""
    V = np.unique(V, axis=0)
    r = V.shape[1]
    g = 0
    for c in combinations(range(len(V)), r):
        g = gcd(g, abs(int(round(np.linalg.det(V[list(c)])))))
        if g == 1:
            return 1
    return g


def align_element(action: LinearAction, nu: lg.WeightVector, moment: np.ndarray):
    """``(h, varsigma)`` with ``Phi = varsigma Coad_h nu``."""
    G = action.group
    lam = nu.covector
    if G.is_torus:
        s = float(moment @ lam / (lam @ lam))
        return np.zeros(G.rank), s
    s = float(np.linalg.norm(moment) / np.linalg.norm(lam))
    target = moment / np.linalg.norm(moment)
    e1 = np.array([1.0, 0.0, 0.0])
    axis = np.cross(e1, target)
    sn = np.linalg.norm(axis)
    angle = np.arctan2(sn, e1 @ target)
    axis = axis / sn if sn > 1e-14 else np.array([0.0, 1.0, 0.0])
    # Ad(exp(t a.e)) rotates by 2t about a
    h = lg.su2_exp(0.5 * angle * axis)
    return h, s


def _t0_basis(action: LinearAction, moment: np.ndarray) -> np.ndarray:
    G = action.group
    C = lg.structure_constants(G)
    m_phi = lg.dualize(moment, G)
    ad = np.einsum("abc,a->cb", C, m_phi)
    K = null_space(np.vstack([ad, moment[None, :]]))
    return K / np.sqrt(G.inner_product_scale)


def _gauss_newton(action, nu, x, tol, max_iter):
    P = _cone_projector(action, nu)
    it = 0
    for it in range(max_iter):
        chart = heisenberg_chart(action.model, x)
        r = P @ moment_map(action, x)
        res = np.linalg.norm(r)
        if res < tol:
            return x, res, it
        J = P @ moment_differential(action, chart)
        step = -np.linalg.pinv(J) @ r
        v = _complex(step)
        nv = np.linalg.norm(v)
        if nv > 0.4:
            v *= 0.4 / nv
        t = 1.0
        while t > 1e-12:
            xn = chart_point(chart, t * v)
            if np.linalg.norm(P @ moment_map(action, xn)) ** 2 <= (1 - 1e-4 * t) * res**2:
                break
            t *= 0.5
        else:
            raise LocusSolverError(f"line search failed; last cone residual {res:.3e}")
        x = xn
    res = np.linalg.norm(P @ moment_map(action, x))
    if res < tol:
        return x, res, it
    raise LocusSolverError(f"no convergence after {max_iter} iterations; last cone residual {res:.3e}")


def locus_point(action: LinearAction, nu: lg.WeightVector, seed, require_free: bool = True,
                tol: float = 1e-12, max_iter: int = 10000, frame_rng=None) -> ReductionPointData:
    """Project ``seed`` onto the cone locus and compute all pointwise data.

    Rank-one tori and SU(2) need no projection (the cone is a ray with the
    same sign, respectively all of ``g* - 0``); otherwise a Gauss-Newton
    iteration with Armijo backtracking drives the component of ``Phi``
    orthogonal to ``nu`` to zero.
    """
    model = action.model
    G = action.group
    x = normalize_point(model, seed)
    it = 0
    if G.is_torus and G.rank > 1:
        x, res, it = _gauss_newton(action, nu, x, tol, max_iter)
    mom = moment_map(action, x)
    h, s = align_element(action, nu, mom)
    if not s > 0:
        raise LocusSolverError("the moment map points away from the cone through nu")
    coad = nu.covector if G.is_torus else lg.su2_adjoint(h) @ nu.covector
    cone_res = float(np.linalg.norm(mom - s * coad))
    free = _is_free(action, x)
    if require_free and not free:
        raise NotFreeError("the group does not act freely at this point")
    chart = heisenberg_chart(model, x, rng=frame_rng)
    V = evaluation_map(action, chart)
    T0 = _t0_basis(action, mom)
    val_t0 = V @ T0
    if T0.shape[1]:
        Hframe = null_space(np.conj(val_t0.T))
    else:
        Hframe = np.eye(model.d, dtype=complex)
    if frame_rng is not None and Hframe.shape[1] > 1:
        rng = np.random.default_rng(frame_rng)
        A = rng.standard_normal((Hframe.shape[1],) * 2) + 1j * rng.standard_normal((Hframe.shape[1],) * 2)
        Hframe = Hframe @ np.linalg.qr(A)[0]
    D = (np.conj(val_t0.T) @ val_t0).real
    orbit = lg.coadjoint_orbit_data(G, nu)
    psi = _psi(G, orbit, mom, D)
    B = _real(np.hstack([Hframe, 1j * Hframe]))
    Om = STANDARD_OMEGA(model.d)
    g1 = B.T @ B
    om1 = B.T @ Om @ B
    return ReductionPointData(
        action=action, nu=nu, point=x, chart=chart, moment=mom, varsigma=s, align_element=h,
        t0_basis=T0, val_t0=val_t0, horizontal_frame=Hframe,
        perp_frame=_real(val_t0), normal_frame=_real(1j * val_t0), D_matrix=D,
        psi_value=psi, g1=g1, omega1=om1, g2=g1 / s, omega2=om1 / s, orbit=orbit,
        cone_residual=cone_res, free=free, iterations=it,
    )


def _psi(G: lg.GroupModel, orbit: lg.CoadjointOrbitData, mom: np.ndarray, D: np.ndarray) -> float:
    detD = float(np.linalg.det(D)) if D.size else 1.0
    if not detD > 0:
        raise NotFreeError(f"det D = {detD:.3e} is not positive")
    r = G.rank
    norm_phi = np.linalg.norm(mom) / np.sqrt(G.inner_product_scale)
    return float(
        2 ** (1 + (r - 1) / 2) * pi / (norm_phi * np.sqrt(detD))
        * orbit.volume**2 / orbit.det_S * G.volume_T / G.volume_G**2
    )


def psi_nu(data: ReductionPointData, group: lg.GroupModel = None, orbit: lg.CoadjointOrbitData = None) -> float:
    """Leading-coefficient density at the point.

    ``2^{1 + (r-1)/2} pi / (|Phi|_phi sqrt(det D)) * vol(O)^2 / |det S| * vol(T) / vol(G)^2``
    """
    group = group or data.group
    orbit = orbit or data.orbit
    return _psi(group, orbit, data.moment, data.D_matrix)


def transversality_margin(data: ReductionPointData) -> float:
    """Smallest singular value certifying transversality of ``Phi`` to the cone.

    With ``r_G = 2`` (torus) this is the map ``dPhi`` followed by the projection
    onto the normal line of the cone; when the normal space is trivial it is
    the smallest singular value of ``dPhi`` itself.
    """
    J = moment_differential(data.action, data.chart)
    if data.group.is_torus and data.r > 1:
        J = _cone_projector(data.action, data.nu) @ J
    s = np.linalg.svd(J, compute_uv=False)
    return float(s[min(J.shape) - 1])


def is_transverse(data: ReductionPointData) -> bool:
    return transversality_margin(data) > NON_TRANSVERSE


def locus_tangent(data: ReductionPointData, fd: bool = True) -> np.ndarray:
    """Real orthonormal basis of ``T_m`` of the cone locus (null space of the cone-normal part of ``dPhi``)."""
    J = moment_differential_fd(data.action, data.chart) if fd else moment_differential(data.action, data.chart)
    if data.group.is_torus and data.r > 1:
        J = _cone_projector(data.action, data.nu) @ J
        return null_space(J, rcond=1e-7)
    return np.eye(2 * data.d)


def characteristic_leaf_tangent(data: ReductionPointData, tol: float = 1e-8) -> np.ndarray:
    """Tangent of the null foliation: ``val(t0)``, checked against the radical of
    ``omega`` on the locus tangent computed by finite differences."""
    a = data.perp_frame
    T = locus_tangent(data, fd=True)
    W = T.T @ STANDARD_OMEGA(data.d) @ T
    K = null_space(W, rcond=1e-7)
    b = T @ K
    if a.shape[1] != b.shape[1]:
        raise RuntimeError("null-foliation constructions disagree in dimension")
    if a.shape[1]:
        ang = subspace_angles(a, b)
        if np.max(ang) > tol:
            raise RuntimeError(f"null-foliation constructions disagree (angle {np.max(ang):.2e})")
    return a


def reduced_metrics(data: ReductionPointData) -> dict:
    return {"g1": data.g1, "omega1": data.omega1, "g2": data.g2, "omega2": data.omega2}


def splitting_residuals(data: ReductionPointData) -> dict:
    """Residuals of the tangent splittings at the point."""
    Om = STANDARD_OMEGA(data.d)
    B = data.horizontal_real
    T = locus_tangent(data, fd=True)
    J = np.block([[np.zeros((data.d, data.d)), -np.eye(data.d)], [np.eye(data.d), np.zeros((data.d, data.d))]])
    full = np.hstack([B, data.perp_frame, data.normal_frame])
    out = {
        "omega_perp_horizontal": float(np.max(np.abs(data.perp_frame.T @ Om @ B), initial=0.0)),
        "normal_is_J_perp": float(np.max(np.abs(data.normal_frame - J @ data.perp_frame), initial=0.0)),
        "normal_g_locus": float(np.max(np.abs(data.normal_frame.T @ T), initial=0.0)),
        "perp_in_locus": float(np.max(np.abs(data.perp_frame - T @ (T.T @ data.perp_frame)), initial=0.0)),
        "horizontal_in_locus": float(np.max(np.abs(B - T @ (T.T @ B)), initial=0.0)),
        "J_horizontal": float(np.linalg.norm(J @ B - B @ np.linalg.lstsq(B, J @ B, rcond=None)[0])),
        "splitting_condition": float(np.linalg.cond(full)),
        "splitting_rank": int(np.linalg.matrix_rank(full, tol=1e-9)),
        "locus_dim": int(T.shape[1]),
    }
    return out


def leaf_curve(data: ReductionPointData, t_max: float = 0.5, step: float = 1e-3, direction: int = 0) -> np.ndarray:
    """Integrate the fundamental field of a ``t0`` direction with RK4 from the point."""
    if data.t0_basis.shape[1] == 0:
        return data.point[None, :]
    A = generator(data.action, data.t0_basis[:, direction])
    f = lambda y: A @ y
    y = data.point.copy()
    out = [y]
    for _ in range(int(round(t_max / step))):
        k1 = f(y)
        k2 = f(y + 0.5 * step * k1)
        k3 = f(y + 0.5 * step * k2)
        k4 = f(y + step * k3)
        y = y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(y)
    return np.array(out)


def circle_period_residual(data: ReductionPointData) -> float:
    """``|exp(2 pi Coad_h nu) . x - x|``: the circle generated by the aligned
    weight closes up after angle ``2 pi``."""
    G = data.group
    if G.is_torus:
        g = 2 * pi * np.asarray(data.nu.components, dtype=float)
    else:
        g = lg.su2_exp(2 * pi * (lg.su2_adjoint(data.align_element) @ data.nu.covector))
    return float(np.linalg.norm(act(data.action, g, data.point) - data.point))


def _group_exp(G: lg.GroupModel, xi):
    return np.asarray(xi, dtype=float) if G.is_torus else lg.su2_exp(xi)


def distance_ratio(data: ReductionPointData, xi, w, v) -> float:
    """``dist_X(mu~_{exp(-xi)}(x + w), x + v) / |xi|_phi^2`` for horizontal ``w``, ``v``."""
    H = data.horizontal_frame
    xw = chart_point(data.chart, H @ np.asarray(w, dtype=complex))
    xv = chart_point(data.chart, H @ np.asarray(v, dtype=complex))
    g = _group_exp(data.group, -np.asarray(xi, dtype=float))
    dist = bundle_distance(data.model, act(data.action, g, xw), xv)
    nrm2 = data.group.inner_product_scale * float(np.sum(np.asarray(xi) ** 2))
    return float(dist / nrm2)


def locus_scan(action: LinearAction, nu: lg.WeightVector, seeds, require_free: bool = True) -> list:
    """One row per seed: point, varsigma, Psi, margin and frame conditioning."""
    rows = []
    for i, sd in enumerate(seeds):
        data = locus_point(action, nu, sd, require_free=require_free)
        res = splitting_residuals(data)
        rows.append({
            "seed": i,
            "point": data.point,
            "varsigma": data.varsigma,
            "psi": data.psi_value,
            "margin": transversality_margin(data),
            "cone_residual": data.cone_residual,
            "splitting_condition": res["splitting_condition"],
            "horizontal_condition": float(np.linalg.cond(data.horizontal_frame)),
        })
    return rows
