"""Projective spaces, their products, and linear actions on them.

A point of the circle bundle ``X`` over ``M = CP^{d_1} x ... x CP^{d_f}`` is
stored as one flat complex vector: the concatenation of unit vectors, one
block per factor.  Two such vectors represent the same point of ``X`` when
their block phases differ by factors multiplying to 1 (the Segre picture
``x = z_1 (x) ... (x) z_f``).  The structure circle ``e^{i theta}`` multiplies
the first block.

The Kähler form on each factor is the Fubini-Study form
``(i/2) d d-bar log |z|^2``.  On an affine chart its Hermitian matrix ``h``
gives ``g(a, b) = Re(a^T h conj(b))`` and ``omega(a, b) = -Im(a^T h conj(b))``.
In a Heisenberg chart at a point, tangent vectors are complex horizontal
vectors ``v`` and ``omega(a, b) = Im(conj(a) . b)``, ``g(a, b) = Re(conj(a) . b)``,
``J`` = multiplication by ``i``.

Group actions are unitary: a Lie algebra element ``xi`` acts on coordinates by
the anti-Hermitian matrix ``A_xi``, the moment map is
``<Phi(x), xi> = i x^* A_xi x`` and the function ``z^alpha`` transforms under
``f -> f o U(g)^{-1}`` with weight ``sum alpha_c w_c + n shift`` for a torus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import factorial, pi

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from . import lie_groups as lg

__all__ = [
    "QuantizedModel",
    "HeisenbergChart",
    "LinearAction",
    "CHART_RADIUS",
    "normalize_point",
    "random_point",
    "fubini_study",
    "fs_distance",
    "bundle_distance",
    "heisenberg_chart",
    "chart_point",
    "circle_act",
    "moment_map",
    "act",
    "group_matrix",
    "generator",
    "vector_field",
    "sym_power_matrix",
    "sym_power_derivation",
    "torus_action",
    "su2_action",
    "moment_norm_range",
]

CHART_RADIUS = 0.5
CONTACT = "contact"
EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class QuantizedModel:
    """``CP^{d_1} x ... x CP^{d_f}`` with the hyperplane bundle on each factor.

    Parameters
    ----------
    factors : tuple of int
        Dimensions ``d_i >= 1`` of the projective factors.
    measure : {"contact", "euclidean"}
        Normalization of the volume on ``X``.  ``"contact"`` (default) is the
        product of sphere surface measures divided by ``2 pi`` per factor, so
        that ``vol(X) = prod pi^{d_i} / d_i!``; this is the normalization under
        which the level kernels have leading coefficient ``k^d / pi^d``.
        ``"euclidean"`` keeps the raw sphere measure ``2 pi^{d+1}/d!``.
    """

    factors: tuple
    measure: str = CONTACT

    def __post_init__(self):
        f = tuple(int(d) for d in np.atleast_1d(self.factors))
        if not f or any(d < 1 for d in f):
            raise ValueError("every projective factor must have dimension >= 1")
        if self.measure not in (CONTACT, EUCLIDEAN):
            raise ValueError(f"unknown measure {self.measure!r}")
        object.__setattr__(self, "factors", f)

    @property
    def d(self) -> int:
        return sum(self.factors)

    @property
    def n_coords(self) -> int:
        return sum(d + 1 for d in self.factors)

    @cached_property
    def blocks(self) -> tuple:
        out, start = [], 0
        for d in self.factors:
            out.append(slice(start, start + d + 1))
            start += d + 1
        return tuple(out)

    @cached_property
    def block_index(self) -> np.ndarray:
        """Factor index of every flat coordinate."""
        return np.concatenate([np.full(d + 1, i) for i, d in enumerate(self.factors)])

    def factor_volume(self, d: int) -> float:
        base = pi**d / factorial(d)
        return base if self.measure == CONTACT else 2 * pi * base

    @property
    def total_sphere_volume(self) -> float:
        """Volume of ``X``."""
        return float(np.prod([self.factor_volume(d) for d in self.factors]))


@dataclass(frozen=True)
class HeisenbergChart:
    """Chart ``(v, theta) -> x + (v, theta)`` centred at ``center``.

    ``frames[i]`` is a ``(d_i + 1) x d_i`` matrix whose columns are an
    orthonormal basis of the Hermitian complement of the ``i``-th block.
    """

    model: QuantizedModel
    center: np.ndarray
    frames: tuple
    radius: float = CHART_RADIUS

    @property
    def horizontal_frame(self) -> np.ndarray:
        """Block-diagonal ``N x d`` frame matrix."""
        N, d = self.model.n_coords, self.model.d
        F = np.zeros((N, d), dtype=complex)
        col = 0
        for blk, Fi in zip(self.model.blocks, self.frames):
            F[blk, col:col + Fi.shape[1]] = Fi
            col += Fi.shape[1]
        return F


def normalize_point(model: QuantizedModel, z) -> np.ndarray:
    """Scale every block of ``z`` to unit length."""
    z = np.array(z, dtype=complex)
    if z.shape[-1] != model.n_coords:
        raise ValueError(f"expected {model.n_coords} coordinates, got {z.shape[-1]}")
    for blk in model.blocks:
        nrm = np.linalg.norm(z[..., blk], axis=-1, keepdims=True)
        if np.any(nrm == 0):
            raise ValueError("a block of the point vanishes")
        z[..., blk] = z[..., blk] / nrm
    return z


def random_point(model: QuantizedModel, rng=None, size=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    shape = (model.n_coords,) if size is None else (size, model.n_coords)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return normalize_point(model, z)


def _real_from_hermitian(h: np.ndarray):
    P, Q = h.real, h.imag
    G = np.block([[P, Q], [-Q, P]])
    Om = np.block([[-Q, P], [-P, -Q]])
    n = h.shape[0]
    J = np.block([[np.zeros((n, n)), -np.eye(n)], [np.eye(n), np.zeros((n, n))]])
    return G, Om, J


def fubini_study(model: QuantizedModel, base_point) -> dict:
    """Fubini-Study structure matrices in affine charts at ``base_point``.

    Each factor uses the affine chart with pivot the largest coordinate of
    the block.  Real coordinates are ordered ``(Re u, Im u)`` with ``u`` the
    concatenated affine coordinates.  Returns a dict with ``omega``, ``g``,
    ``J`` (real ``2d x 2d``), the Hermitian matrix ``h`` and ``pivots``.
    """
    z = np.asarray(base_point, dtype=complex)
    hs, pivots = [], []
    for blk in model.blocks:
        zb = z[blk]
        p = int(np.argmax(np.abs(zb)))
        u = np.delete(zb, p) / zb[p]
        s = 1 + np.vdot(u, u).real
        # h_{jk} = d_j dbar_k log(1 + |u|^2)
        h = (np.eye(len(u)) * s - np.outer(np.conj(u), u)) / s**2
        hs.append(h)
        pivots.append(p)
    d = model.d
    H = np.zeros((d, d), dtype=complex)
    i = 0
    for h in hs:
        H[i:i + len(h), i:i + len(h)] = h
        i += len(h)
    G, Om, J = _real_from_hermitian(H)
    return {"omega": Om, "g": G, "J": J, "h": H, "pivots": tuple(pivots)}


def fs_distance(model: QuantizedModel, x, y) -> np.ndarray:
    """Fubini-Study geodesic distance between the projective classes of ``x`` and ``y``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    tot = 0.0
    for blk in model.blocks:
        c = np.abs(np.sum(x[..., blk] * np.conj(y[..., blk]), axis=-1))
        nx = np.linalg.norm(x[..., blk], axis=-1)
        ny = np.linalg.norm(y[..., blk], axis=-1)
        tot = tot + np.arccos(np.clip(c / (nx * ny), 0.0, 1.0)) ** 2
    return np.sqrt(tot)


def bundle_distance(model: QuantizedModel, x, y) -> np.ndarray:
    """Chordal distance on ``X`` through the Segre embedding."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    prod = 1.0 + 0j
    for blk in model.blocks:
        prod = prod * np.sum(x[..., blk] * np.conj(y[..., blk]), axis=-1)
    return np.sqrt(np.maximum(2.0 - 2.0 * prod.real, 0.0))


def heisenberg_chart(model: QuantizedModel, x, rng=None, frame_rotation=None) -> HeisenbergChart:
    """Heisenberg chart at ``x``.

    ``x + (v, theta) = e^{i theta} (z_i + F_i v_i) / sqrt(1 + |v_i|^2)`` per
    block, the phase acting on the first block.  With this chart the level-k
    kernel satisfies
    ``Pi_k(x + v/sqrt(k), x + w/sqrt(k)) ~ (k/pi)^d exp(v.conj(w) - |v|^2/2 - |w|^2/2)``.

    ``rng`` draws a random unitary change of each frame; ``frame_rotation``
    (a ``d x d`` unitary, block diagonal per factor) applies a given one.
    """
    x = normalize_point(model, x)
    frames = []
    gen = np.random.default_rng(rng) if rng is not None else None
    col = 0
    for blk, d in zip(model.blocks, model.factors):
        z = x[blk]
        M = np.column_stack([z, np.eye(d + 1, dtype=complex)])
        Q, _ = np.linalg.qr(M)
        F = Q[:, 1:d + 1]
        # QR may flip the sign/phase of the first column; remove any overlap
        F = F - np.outer(z, np.conj(z) @ F)
        F, _ = np.linalg.qr(F)
        if gen is not None:
            A = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
            U, _ = np.linalg.qr(A)
            F = F @ U
        if frame_rotation is not None:
            F = F @ np.asarray(frame_rotation)[col:col + d, col:col + d]
        frames.append(F)
        col += d
    return HeisenbergChart(model, x, tuple(frames))


def chart_point(chart: HeisenbergChart, v=None, theta=0.0, check_radius: bool = True) -> np.ndarray:
    """The point ``x + (v, theta)``; ``v`` may carry leading batch axes."""
    model = chart.model
    if v is None:
        v = np.zeros(model.d, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if check_radius and np.any(np.linalg.norm(v, axis=-1) > chart.radius + 1e-15):
        raise ValueError(f"chart displacement beyond the chart radius {chart.radius}")
    out = np.empty(v.shape[:-1] + (model.n_coords,), dtype=complex)
    col = 0
    for blk, F, d in zip(model.blocks, chart.frames, model.factors):
        vi = v[..., col:col + d]
        y = chart.center[blk] + vi @ F.T
        out[..., blk] = y / np.sqrt(1 + np.sum(np.abs(vi) ** 2, axis=-1, keepdims=True))
        col += d
    theta = np.asarray(theta, dtype=float)
    out[..., model.blocks[0]] *= np.exp(1j * theta)[..., None] if theta.ndim else np.exp(1j * theta)
    return out


def circle_act(model: QuantizedModel, theta, x) -> np.ndarray:
    """Structure circle action ``e^{i theta} x``."""
    x = np.array(x, dtype=complex)
    x[..., model.blocks[0]] *= np.exp(1j * theta)
    return x


# --------------------------------------------------------------------------
# symmetric powers of the defining representation of SU(2)


def _binomial_poly_power(p1, p2, q, p):
    """Coefficients (in powers of u) of ``(p1[0] u + p1[1] v)^q (p2[0] u + p2[1] v)^(p-q)``."""
    out = np.array([1.0 + 0j])
    for _ in range(q):
        out = np.convolve(out, np.array([p1[1], p1[0]]))
    for _ in range(p - q):
        out = np.convolve(out, np.array([p2[1], p2[0]]))
    return out  # out[j] = coefficient of u^j v^(p-j)


def sym_power_matrix(g, p: int) -> np.ndarray:
    """Matrix of ``Sym^p`` of a 2x2 matrix in the orthonormal basis
    ``u^q v^{p-q} / sqrt(q! (p-q)!)`` ordered by decreasing ``q``."""
    g = np.asarray(g, dtype=complex)
    if g.ndim > 2:
        return np.stack([sym_power_matrix(gi, p) for gi in g.reshape(-1, 2, 2)]).reshape(
            g.shape[:-2] + (p + 1, p + 1)
        )
    M = np.zeros((p + 1, p + 1), dtype=complex)
    fact = np.array([factorial(j) for j in range(p + 1)], dtype=float)
    for col, q in enumerate(range(p, -1, -1)):
        coeff = _binomial_poly_power(g[:, 0], g[:, 1], q, p)
        for row, q2 in enumerate(range(p, -1, -1)):
            M[row, col] = coeff[q2] * np.sqrt(fact[q2] * fact[p - q2] / (fact[q] * fact[p - q]))
    return M


def sym_power_derivation(X, p: int) -> np.ndarray:
    """Derivative of :func:`sym_power_matrix` at the identity in direction ``X``."""
    X = np.asarray(X, dtype=complex)
    M = np.zeros((p + 1, p + 1), dtype=complex)
    fact = np.array([factorial(j) for j in range(p + 1)], dtype=float)
    idx = {q: r for r, q in enumerate(range(p, -1, -1))}
    for q in range(p, -1, -1):
        # u -> X00 u + X10 v, v -> X01 u + X11 v, applied as a derivation
        terms = {}
        if q > 0:
            terms[q] = terms.get(q, 0) + q * X[0, 0]
            terms[q - 1] = terms.get(q - 1, 0) + q * X[1, 0]
        if p - q > 0:
            terms[q + 1] = terms.get(q + 1, 0) + (p - q) * X[0, 1]
            terms[q] = terms.get(q, 0) + (p - q) * X[1, 1]
        for q2, c in terms.items():
            M[idx[q2], idx[q]] += c * np.sqrt(fact[q2] * fact[p - q2] / (fact[q] * fact[p - q]))
    return M


# --------------------------------------------------------------------------
# linear actions


@dataclass(frozen=True)
class LinearAction:
    """Unitary linear action of a torus or of SU(2) on the homogeneous coordinates.

    Torus: ``weights`` is an ``N x r`` integer matrix (one row per flat
    coordinate) and ``shift`` an integer ``r``-tuple applied once, on the
    first block.  The element with angles ``theta`` acts by
    ``x_c -> e^{-i (w_c + [c in block 0] shift) . theta} x_c``, so ``z^alpha``
    has weight ``sum alpha_c w_c + n shift`` and ``Phi = sum w_c |x_c|^2 + shift``.

    SU(2): ``blocks`` lists, per factor, the dimensions of irreducible
    summands (``Sym^{m-1}`` of the defining representation for a summand of
    dimension ``m``; dimension 1 is trivial).

    Construction checks that ``0`` is not in the image of the moment map.
    """

    group: lg.GroupModel
    model: QuantizedModel
    weights: tuple = None
    shift: tuple = None
    blocks: tuple = None
    check: bool = True

    def __post_init__(self):
        m = self.model
        if self.group.is_torus:
            W = np.asarray(self.weights, dtype=int).reshape(m.n_coords, self.group.rank)
            s = np.zeros(self.group.rank, dtype=int) if self.shift is None else np.asarray(self.shift, dtype=int)
            if s.shape != (self.group.rank,):
                raise ValueError("shift must have one entry per torus circle")
            object.__setattr__(self, "weights", tuple(map(tuple, W.tolist())))
            object.__setattr__(self, "shift", tuple(s.tolist()))
        else:
            if self.blocks is None or len(self.blocks) != len(m.factors):
                raise ValueError("SU(2) action needs one block list per factor")
            bl = tuple(tuple(int(b) for b in np.atleast_1d(fb)) for fb in self.blocks)
            for fb, d in zip(bl, m.factors):
                if sum(fb) != d + 1 or any(b < 1 for b in fb):
                    raise ValueError("SU(2) block dimensions must add up to d_i + 1")
            object.__setattr__(self, "blocks", bl)
            object.__setattr__(self, "shift", (0,))
        if self.check:
            lo, hi = moment_norm_range(self)
            # the SU(2) bound is numerical; sqrt of a near-zero minimum sits around 1e-8
            floor = 1e-9 if self.group.is_torus else 1e-5 * hi
            if not lo > floor:
                raise ValueError(
                    "the moment map vanishes somewhere on M (0 lies in its image); "
                    "choose a different linearization shift"
                )

    # torus data ------------------------------------------------------
    @cached_property
    def weight_matrix(self) -> np.ndarray:
        """Effective torus weights of the coordinates, shift included on block 0."""
        W = np.asarray(self.weights, dtype=float).copy()
        W[self.model.blocks[0]] += np.asarray(self.shift, dtype=float)
        return W

    @cached_property
    def generators(self) -> np.ndarray:
        """Anti-Hermitian matrices ``A_a = dU(e_a)``, shape ``(dim g, N, N)``."""
        N = self.model.n_coords
        if self.group.is_torus:
            W = self.weight_matrix
            return np.stack([np.diag(-1j * W[:, a]) for a in range(self.group.rank)])
        A = np.zeros((3, N, N), dtype=complex)
        for a in range(3):
            pos = 0
            for fb in self.blocks:
                for b in fb:
                    A[a, pos:pos + b, pos:pos + b] = sym_power_derivation(lg.SU2_BASIS[a], b - 1)
                    pos += b
        return A

    @cached_property
    def su2_coordinate_weights(self) -> np.ndarray:
        """Eigenvalue labels ``mu_c`` with ``A_{e1} = diag(i mu_c)``."""
        return np.real(np.diag(self.generators[0]) / 1j)


def torus_action(model: QuantizedModel, weights, shift=None, inner_product_scale: float = 1.0, check=True) -> LinearAction:
    W = np.asarray(weights, dtype=int)
    if W.ndim == 1:
        W = W[:, None]
    G = lg.torus(W.shape[1], inner_product_scale)
    return LinearAction(G, model, weights=W, shift=shift, check=check)


def su2_action(model: QuantizedModel, blocks=None, inner_product_scale: float = 1.0, check=True) -> LinearAction:
    if blocks is None:
        blocks = tuple((d + 1,) for d in model.factors[:1]) + tuple((1,) * (d + 1) for d in model.factors[1:])
    return LinearAction(lg.su2(inner_product_scale), model, blocks=blocks, check=check)


def generator(action: LinearAction, xi) -> np.ndarray:
    """``A_xi = sum_a xi_a A_a``."""
    return np.tensordot(np.asarray(xi, dtype=float), action.generators, axes=(0, 0))


def group_matrix(action: LinearAction, g) -> np.ndarray:
    """Unitary ``U(g)`` on the flat coordinates.

    ``g`` is an angle tuple for a torus (returns the diagonal as a vector) or
    an SU(2) matrix (returns the full matrix).  Batched over leading axes.
    """
    if action.group.is_torus:
        theta = np.asarray(g, dtype=float)
        if theta.ndim == 0:
            theta = theta[None]
        return np.exp(-1j * theta @ action.weight_matrix.T)
    g = np.asarray(g, dtype=complex)
    N = action.model.n_coords
    U = np.zeros(g.shape[:-2] + (N, N), dtype=complex)
    pos = 0
    for fb in action.blocks:
        for b in fb:
            U[..., pos:pos + b, pos:pos + b] = sym_power_matrix(g, b - 1) if b > 1 else 1.0
            pos += b
    return U


def act(action: LinearAction, g, x) -> np.ndarray:
    """``mu~_g(x) = U(g) x``; commutes with the structure circle."""
    x = np.asarray(x, dtype=complex)
    U = group_matrix(action, g)
    if action.group.is_torus:
        return U * x
    return np.einsum("...ij,...j->...i", U, x)


def moment_map(action: LinearAction, x) -> np.ndarray:
    """Moment map ``<Phi(x), e_a> = i x^* A_a x`` as covector components.

    For a torus this is ``sum_c w_c |x_c|^2 + shift``; it is equivariant,
    ``Phi(U(g) x) = Coad_g Phi(x)``, and ``d<Phi, xi> = 2 omega(xi_M, .)`` for
    the Fubini-Study form.
    """
    x = np.asarray(x, dtype=complex)
    if action.group.is_torus:
        return np.abs(x) ** 2 @ action.weight_matrix
    Ax = np.einsum("aij,...j->...ai", action.generators, x)
    return np.real(1j * np.einsum("...i,...ai->...a", np.conj(x), Ax))


def vector_field(action: LinearAction, xi, x) -> np.ndarray:
    """Infinitesimal action ``A_xi x`` on coordinates (the lift ``xi_X`` up to sign conventions)."""
    return generator(action, xi) @ np.asarray(x, dtype=complex)


def _sphere_from_angles(model, params):
    """Map unconstrained real parameters to a point (for the moment-norm search)."""
    p = np.asarray(params)
    N = model.n_coords
    z = p[:N] + 1j * p[N:]
    return normalize_point(model, z)


def moment_norm_range(action: LinearAction, n_starts: int = 24, seed: int = 7):
    """Lower and upper bounds of ``|Phi|`` (Euclidean in covector components) on ``M``.

    For a torus the image of ``Phi`` is the convex hull of the vertex sums
    ``sum_i w_{c_i} + shift`` (one coordinate chosen per factor); the lower
    value returned is the distance from 0 to that polytope, computed exactly.
    For SU(2) both values come from a multistart minimization.
    """
    key = ("_norm_range", n_starts, seed)
    memo = action.__dict__.setdefault("_memo", {})
    if key not in memo:
        memo[key] = _moment_norm_range(action, n_starts, seed)
    return memo[key]


def _moment_norm_range(action, n_starts, seed):
    m = action.model
    if action.group.is_torus:
        P = torus_vertex_weights(action)
        dist, _ = _min_norm_point(P)
        return dist, float(np.max(np.linalg.norm(P, axis=1)))
    rng = np.random.default_rng(seed)
    # squared norm: smooth at zeros of Phi, where the norm itself would stall BFGS
    f = lambda p: float(np.sum(moment_map(action, _sphere_from_angles(m, p)) ** 2))
    best_lo, best_hi = np.inf, 0.0
    for _ in range(n_starts):
        p0 = rng.standard_normal(2 * m.n_coords)
        r = minimize(f, p0, method="BFGS", options={"gtol": 1e-14})
        best_lo = min(best_lo, r.fun)
        r = minimize(lambda p: -f(p), p0, method="BFGS", options={"gtol": 1e-14})
        best_hi = max(best_hi, -r.fun)
    return float(np.sqrt(max(best_lo, 0.0))), float(np.sqrt(best_hi))


def torus_vertex_weights(action: LinearAction) -> np.ndarray:
    """All sums ``w_{c_1} + ... + w_{c_f} + shift`` with ``c_i`` in block ``i``."""
    m = action.model
    W = np.asarray(action.weights, dtype=float)
    P = np.zeros((1, action.group.rank)) + np.asarray(action.shift, dtype=float)
    for blk in m.blocks:
        P = (P[:, None, :] + W[blk][None, :, :]).reshape(-1, action.group.rank)
    return P


def _min_norm_point(P: np.ndarray):
    """Closest point to 0 in the convex hull of the rows of ``P``.

    Returns ``(distance, point)``.  A positive distance is certified by the
    separating direction: every vertex has positive inner product with it.
    """
    n = len(P)
    cons = ({"type": "eq", "fun": lambda l: np.sum(l) - 1, "jac": lambda l: np.ones(n)},)
    obj = lambda l: 0.5 * np.sum((l @ P) ** 2)
    jac = lambda l: P @ (l @ P)
    best = None
    for start in [np.full(n, 1.0 / n)] + [np.eye(n)[i] for i in range(n)]:
        r = minimize(obj, start, jac=jac, bounds=[(0, 1)] * n, constraints=cons, method="SLSQP",
                     options={"ftol": 1e-15, "maxiter": 500})
        if best is None or r.fun < best.fun:
            best = r
    p = best.x @ P
    dist = float(np.linalg.norm(p))
    if dist > 1e-9:
        u = p / dist
        if np.min(P @ u) <= 0:
            # the numerical optimum is not a separating certificate; report 0
            return 0.0, p
        return float(np.min(P @ u)) if np.min(P @ u) < dist else dist, p
    return 0.0, p
