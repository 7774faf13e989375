"""Compact groups of rank at most two: tori and SU(2).

Conventions
-----------
Lie algebra elements are stored as real coordinate vectors in a fixed basis.
For a torus of rank ``r`` this is the standard basis of ``R^r`` with
``exp(theta) = (e^{i theta_1}, ..., e^{i theta_r})``, so the integral lattice
is ``2 pi Z^r``.  For SU(2) the basis is

    e1 = diag(i, -i),  e2 = [[0, 1], [-1, 0]],  e3 = [[0, i], [i, 0]],

which satisfies ``[e_a, e_b] = 2 eps_abc e_c`` and is orthonormal for the
invariant product ``-tr(XY)/2``.  The invariant product used throughout is
``scale`` times the standard one (standard = Euclidean on torus angles), so
the basis vectors have squared length ``scale``.

Covectors are stored by their values on the basis, ``lam_a = lam(e_a)``.  A
weight ``nu`` of SU(2) is the integer ``n = nu(e1)`` (the highest weight of the
irreducible representation of dimension ``n + 1``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import pi

import numpy as np
from scipy.special import roots_legendre

__all__ = [
    "GroupModel",
    "WeightVector",
    "CoadjointOrbitData",
    "HaarQuadrature",
    "torus",
    "su2",
    "weight",
    "weyl_dimension",
    "character",
    "haar_quadrature",
    "coadjoint_orbit_data",
    "dualize",
    "undualize",
    "structure_constants",
    "su2_matrix",
    "su2_from_quaternion",
    "su2_exp",
    "su2_class_angle",
    "su2_adjoint",
    "covector_components",
    "SINGULAR_ANGLE_THRESHOLD",
]

TORUS = "torus"
SU2 = "su2"

#: Below this value of ``|sin(theta)|`` SU(2) characters use the Taylor form.
SINGULAR_ANGLE_THRESHOLD = 1e-6

SU2_BASIS = np.array(
    [
        [[1j, 0], [0, -1j]],
        [[0, 1], [-1, 0]],
        [[0, 1j], [1j, 0]],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class GroupModel:
    """A torus ``T^r`` (``r`` in {1, 2}) or SU(2) with an invariant product.

    Parameters
    ----------
    kind : {"torus", "su2"}
    rank : int
        Rank of the group; 1 for SU(2).
    inner_product_scale : float
        Multiplier ``c`` of the standard invariant product.

    Attributes
    ----------
    dim : int
        Real dimension of the Lie algebra.
    volume_T, volume_G : float
        Riemannian volumes of a maximal torus and of the group for the metric
        induced by the invariant product.
    """

    kind: str
    rank: int
    inner_product_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in (TORUS, SU2):
            raise ValueError(f"unsupported group kind {self.kind!r}")
        if self.kind == SU2 and self.rank != 1:
            raise ValueError("SU(2) has rank 1")
        if self.kind == TORUS and self.rank not in (1, 2):
            raise ValueError("only tori of rank 1 or 2 are supported")
        if not self.inner_product_scale > 0:
            raise ValueError("inner_product_scale must be positive")

    @property
    def is_torus(self) -> bool:
        return self.kind == TORUS

    @property
    def dim(self) -> int:
        return self.rank if self.is_torus else 3

    @property
    def volume_T(self) -> float:
        return (2 * pi * np.sqrt(self.inner_product_scale)) ** self.rank

    @property
    def volume_G(self) -> float:
        if self.is_torus:
            return self.volume_T
        # SU(2) is the 3-sphere of radius sqrt(c) in the metric -c tr(XY)/2.
        return 2 * pi**2 * self.inner_product_scale**1.5


def torus(rank: int, inner_product_scale: float = 1.0) -> GroupModel:
    return GroupModel(TORUS, rank, inner_product_scale)


def su2(inner_product_scale: float = 1.0) -> GroupModel:
    return GroupModel(SU2, 1, inner_product_scale)


@dataclass(frozen=True)
class WeightVector:
    """Dominant integral weight.

    ``components`` has length ``rank``; for SU(2) it is ``(n,)`` with
    ``n >= 0``.  ``norm`` is the length for the dual invariant product.
    """

    group: GroupModel
    components: tuple

    def __post_init__(self):
        comps = tuple(int(c) for c in np.atleast_1d(self.components))
        if any(c != v for c, v in zip(comps, np.atleast_1d(self.components))):
            raise ValueError("weights must be integral")
        if len(comps) != self.group.rank:
            raise ValueError(
                f"weight of length {len(comps)} for a group of rank {self.group.rank}"
            )
        if not self.group.is_torus and comps[0] < 0:
            raise ValueError("SU(2) highest weight must be a nonnegative integer")
        object.__setattr__(self, "components", comps)

    @property
    def covector(self) -> np.ndarray:
        """Values on the Lie algebra basis."""
        return covector_components(self.group, self.components)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.covector) / np.sqrt(self.group.inner_product_scale))

    def scaled(self, k: int) -> "WeightVector":
        return WeightVector(self.group, tuple(k * c for c in self.components))

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.components)


def weight(group: GroupModel, components) -> WeightVector:
    return WeightVector(group, tuple(np.atleast_1d(components)))


def covector_components(group: GroupModel, components) -> np.ndarray:
    comps = np.asarray(np.atleast_1d(components), dtype=float)
    if group.is_torus:
        return comps.copy()
    return np.array([comps[0], 0.0, 0.0])


@dataclass(frozen=True)
class CoadjointOrbitData:
    """Orbit dimension, symplectic volume and ``|det S_nu|`` for a weight."""

    weight: WeightVector
    orbit_dim: int
    volume: float
    det_S: float


@dataclass(frozen=True)
class HaarQuadrature:
    """Probability Haar quadrature.

    ``nodes`` are torus angles of shape ``(N, r)`` for a torus, SU(2)
    matrices of shape ``(N, 2, 2)`` for the full SU(2) rule, or class angles of
    shape ``(N,)`` when ``class_functions_only`` is true.
    """

    group: GroupModel
    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int
    class_functions_only: bool = False

    def __len__(self):
        return len(self.weights)


def _check_k(k):
    if int(k) != k or k < 0:
        raise ValueError("k must be a nonnegative integer")


def weyl_dimension(group: GroupModel, nu: WeightVector, k: int = 1) -> int:
    """Dimension of the irreducible representation with highest weight ``k nu``."""
    _check_k(k)
    if nu.group != group:
        raise ValueError("weight belongs to a different group")
    if group.is_torus:
        return 1
    return k * nu.components[0] + 1


def su2_class_angle(g) -> np.ndarray:
    """Angle ``theta`` in ``[0, pi]`` with ``g`` conjugate to ``diag(e^{i theta}, e^{-i theta})``."""
    g = np.asarray(g)
    a = g[..., 0, 0]
    b = g[..., 1, 0]
    return np.arctan2(np.sqrt(a.imag**2 + np.abs(b) ** 2), a.real)


def _su2_character_from_angle(n: int, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta)
    out = np.empty(theta.shape, dtype=float)
    regular = np.abs(s) >= SINGULAR_ANGLE_THRESHOLD
    with np.errstate(invalid="ignore", divide="ignore"):
        out[regular] = np.sin((n + 1) * theta[regular]) / s[regular]
    if not np.all(regular):
        t = theta[~regular]
        # nearest multiple of pi and offset from it
        m = np.round(t / pi)
        dt = t - m * pi
        sign = np.where(np.mod(m, 2) == 0, 1.0, (-1.0) ** n)
        out[~regular] = sign * (n + 1) * (1 - n * (n + 2) * dt**2 / 6)
    return out


def character(group: GroupModel, nu: WeightVector, k: int, element) -> np.ndarray:
    """Character of the irreducible representation of highest weight ``k nu``.

    ``element`` is a torus angle tuple (or an array of them with the angle
    axis last), an SU(2) class angle (scalar or array), or an array of SU(2)
    matrices of shape ``(..., 2, 2)``.
    """
    _check_k(k)
    if group.is_torus:
        theta = np.asarray(element, dtype=float)
        if theta.ndim == 0:
            theta = theta[None]
        if theta.shape[-1] != group.rank:
            raise ValueError("angle tuple has the wrong length")
        lam = k * np.asarray(nu.components, dtype=float)
        return np.exp(1j * (theta @ lam))
    n = k * nu.components[0]
    el = np.asarray(element)
    if el.ndim >= 2 and el.shape[-2:] == (2, 2):
        el = su2_class_angle(el)
    return _su2_character_from_angle(n, el).astype(complex)


def haar_quadrature(group: GroupModel, exact_degree: int, class_functions_only: bool = False) -> HaarQuadrature:
    """Exact probability Haar quadrature.

    Torus: product trapezoid rule with ``exact_degree + 1`` nodes per circle,
    exact for all characters ``e^{i m theta}`` with ``|m_j| <= exact_degree``.

    SU(2), ``class_functions_only``: Weyl integration
    ``(2/pi) int_0^pi f(theta) sin^2(theta) dtheta`` discretized by an offset
    trapezoid rule with ``exact_degree + 3`` nodes; exact for class functions
    that are trigonometric polynomials of degree ``exact_degree``.

    SU(2), full rule: Hopf coordinates ``a = sqrt(u) e^{i xi1}``,
    ``b = sqrt(1-u) e^{i xi2}`` with ``u`` uniform; Gauss-Legendre in ``u`` and
    trapezoid in the two angles.  Exact for polynomials of total degree
    ``exact_degree`` in the matrix entries and their conjugates.
    """
    D = max(int(exact_degree), 1)
    if group.is_torus:
        N = D + 1
        ang = 2 * pi * np.arange(N) / N
        grids = np.meshgrid(*([ang] * group.rank), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)
        weights = np.full(len(nodes), 1.0 / len(nodes))
        return HaarQuadrature(group, nodes, weights, D)
    if class_functions_only:
        N = D + 3
        theta = 2 * pi * (np.arange(N) + 0.5) / N
        weights = 2 * np.sin(theta) ** 2 / N
        return HaarQuadrature(group, theta, weights, D, True)
    N = D + 1
    M = (D // 2) // 2 + 1
    x, wl = roots_legendre(M)
    u = 0.5 * (x + 1)
    wu = 0.5 * wl
    ang = 2 * pi * np.arange(N) / N
    U, X1, X2 = np.meshgrid(u, ang, ang, indexing="ij")
    W = np.broadcast_to(wu[:, None, None], U.shape) / N**2
    a = np.sqrt(U) * np.exp(1j * X1)
    b = np.sqrt(1 - U) * np.exp(1j * X2)
    nodes = su2_matrix(a.ravel(), b.ravel())
    return HaarQuadrature(group, nodes, W.ravel().copy(), D)


def su2_matrix(a, b) -> np.ndarray:
    """The SU(2) matrix ``[[a, -conj(b)], [b, conj(a)]]`` (vectorized)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = -np.conj(b)
    out[..., 1, 0] = b
    out[..., 1, 1] = np.conj(a)
    return out


def su2_from_quaternion(q) -> np.ndarray:
    """``q0 I + q1 e1 + q2 e2 + q3 e3`` for unit quaternions ``q``."""
    q = np.asarray(q, dtype=float)
    return su2_matrix(q[..., 0] + 1j * q[..., 1], -q[..., 2] + 1j * q[..., 3])


def su2_exp(xi) -> np.ndarray:
    """Exponential of ``sum_a xi_a e_a`` (vectorized over leading axes)."""
    xi = np.asarray(xi, dtype=float)
    t = np.linalg.norm(xi, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(t > 0, np.sin(t) / np.where(t > 0, t, 1.0), 1.0)
    q = np.concatenate([np.cos(t)[..., None], sinc[..., None] * xi], axis=-1)
    return su2_from_quaternion(q)


def su2_euler(alpha, beta, gamma) -> np.ndarray:
    """``exp(alpha e1) exp(beta e2) exp(gamma e1)``."""
    e = lambda a, v: su2_exp(np.asarray(a, dtype=float)[..., None] * np.asarray(v, dtype=float))
    return e(alpha, [1, 0, 0]) @ e(beta, [0, 1, 0]) @ e(gamma, [1, 0, 0])


def su2_adjoint(g) -> np.ndarray:
    """Matrix ``R`` of ``Ad_g`` in the basis ``(e1, e2, e3)``: ``Ad_g e_b = sum_a R_ab e_a``."""
    g = np.asarray(g, dtype=complex)
    ginv = np.conj(np.swapaxes(g, -1, -2))
    R = np.empty(g.shape[:-2] + (3, 3))
    for b in range(3):
        m = g @ SU2_BASIS[b] @ ginv
        # coefficient on e_a is -tr(e_a m)/2
        for a in range(3):
            R[..., a, b] = np.real(-np.einsum("ij,...ji->...", SU2_BASIS[a], m) / 2)
    return R


def structure_constants(group: GroupModel) -> np.ndarray:
    """``C[a, b, c]`` with ``[e_a, e_b] = sum_c C[a, b, c] e_c``."""
    n = group.dim
    C = np.zeros((n, n, n))
    if group.is_torus:
        return C
    eps = np.zeros((3, 3, 3))
    for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps[a, b, c] = 1
        eps[b, a, c] = -1
    return 2 * eps


def dualize(lam, group: GroupModel) -> np.ndarray:
    """Vector ``lam^phi`` with ``phi(lam^phi, .) = lam`` (coordinates in the basis)."""
    return np.asarray(lam, dtype=float) / group.inner_product_scale


def undualize(xi, group: GroupModel) -> np.ndarray:
    """Inverse of :func:`dualize`: the covector ``phi(xi, .)``."""
    return np.asarray(xi, dtype=float) * group.inner_product_scale


def _orbit_volume_quadrature(group: GroupModel, lam: np.ndarray, n_theta: int = 64, n_phi: int = 64) -> float:
    """Integrate the Kostant-Kirillov-Souriau form over the coadjoint orbit of ``lam``.

    The orbit is parametrized as a sphere in the orthonormal picture; at each
    point ``p`` the tangent vectors are written as ``ad_X p`` and the form is
    ``<p, [X, Y]>``.
    """
    c = group.inner_product_scale
    C = structure_constants(group) / np.sqrt(c)  # constants in the orthonormal basis E_a = e_a/sqrt(c)
    p0 = lam / np.sqrt(c)  # components of lam^phi in the orthonormal basis
    R = np.linalg.norm(p0)
    x, wl = roots_legendre(n_theta)
    theta = 0.5 * pi * (x + 1)
    wt = 0.5 * pi * wl
    phi = 2 * pi * np.arange(n_phi) / n_phi
    total = 0.0
    for th, w in zip(theta, wt):
        for ph in phi:
            p = R * np.array([np.cos(th), np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph)])
            dth = R * np.array([-np.sin(th), np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph)])
            dph = R * np.array([0.0, -np.sin(th) * np.sin(ph), np.sin(th) * np.cos(ph)])
            # ad_X p = [X, p]; matrix A with A @ X = [X, p]
            A = np.einsum("abc,b->ca", C, p)
            X = np.linalg.lstsq(A, dth, rcond=None)[0]
            Y = np.linalg.lstsq(A, dph, rcond=None)[0]
            bracket = np.einsum("abc,a,b->c", C, X, Y)
            total += w * (2 * pi / n_phi) * abs(p @ bracket)
    return float(total)


@lru_cache(maxsize=64)
def coadjoint_orbit_data(group: GroupModel, nu: WeightVector) -> CoadjointOrbitData:
    """Orbit data for ``nu``; zero-dimensional conventions give volume 1 and ``det_S`` 1."""
    if nu.is_zero():
        raise ValueError("the zero weight has a point orbit through 0, which is excluded")
    if group.is_torus:
        return CoadjointOrbitData(nu, 0, 1.0, 1.0)
    lam = nu.covector
    volume = _orbit_volume_quadrature(group, lam)
    # ad of lam^phi restricted to the orthogonal complement of the torus (e2, e3)
    C = structure_constants(group)
    lam_phi = dualize(lam, group)
    ad = np.einsum("abc,a->cb", C, lam_phi)  # ad[c, b]: coefficient of e_c in [lam_phi, e_b]
    det_S = abs(np.linalg.det(ad[1:, 1:]))
    return CoadjointOrbitData(nu, 2, volume, float(det_S))
