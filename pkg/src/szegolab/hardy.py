"""Hardy spaces on the model circle bundles and their isotypic pieces.

Level-``n`` sections are polynomials on the flat coordinate vector that are
homogeneous of degree ``n`` in every block.  The monomial ``z^alpha`` has
squared norm ``prod_i vol_i * alpha_i! d_i! / (n + d_i)!`` where ``vol_i`` is
the factor volume of the chosen measure, and the level kernel is

    Pi_n(x, y) = prod_i binom(n + d_i, d_i) / vol_i * <x_i, y_i>^n,
    <a, b> = sum_j a_j conj(b_j).

The isotype ``H(X)_{k nu}`` collects every level.  Its kernel is computed two
ways: as a sum over an orthonormal basis and as the character average
``d_{k nu} int conj(chi_{k nu}(g)) Pi(mu~_{g^-1} x, y) dg`` over a Haar rule.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from itertools import product
from math import factorial

import numpy as np
from scipy.linalg import qr
from scipy.special import gammaln, roots_jacobi

from . import lie_groups as lg
from .model_geometry import (
    CONTACT,
    LinearAction,
    QuantizedModel,
    group_matrix,
    moment_norm_range,
    torus_vertex_weights,
    _min_norm_point,
)

__all__ = [
    "MonomialSection",
    "IsotypeBasis",
    "CACHE_ENV",
    "monomial_log_norm2",
    "monomial_section",
    "level_multi_indices",
    "szego_level_kernel",
    "level_kernel_by_basis",
    "level_range",
    "isotype_basis",
    "basis_values",
    "equivariant_kernel",
    "equivariant_kernel_by_characters",
    "character_projector",
    "level_traces",
    "isotype_dimension",
    "isotype_dimension_by_characters",
    "sphere_quadrature",
    "required_degree",
]

#: Environment variable naming a directory for cached isotype bases.
CACHE_ENV = "SZEGOLAB_CACHE_DIR"


# --------------------------------------------------------------------------
# monomials and level kernels


def monomial_log_norm2(model: QuantizedModel, alpha) -> np.ndarray:
    """Natural log of the squared L^2 norm of ``z^alpha`` (batched over rows)."""
    alpha = np.asarray(alpha)
    out = np.zeros(alpha.shape[:-1])
    for blk, d in zip(model.blocks, model.factors):
        a = alpha[..., blk]
        n = a.sum(axis=-1)
        out = out + np.log(model.factor_volume(d)) + gammaln(d + 1) + gammaln(a + 1).sum(axis=-1) - gammaln(n + d + 1)
    return out


@dataclass(frozen=True)
class MonomialSection:
    """The monomial ``z^alpha`` with its level, L^2 norm and torus weight."""

    multi_index: tuple
    level: int
    log_norm2: float
    weight: tuple = ()

    @property
    def norm(self) -> float:
        return float(np.exp(0.5 * self.log_norm2))


def monomial_section(model: QuantizedModel, alpha, action: LinearAction = None) -> MonomialSection:
    alpha = tuple(int(a) for a in alpha)
    levels = {int(sum(alpha[b])) for b in model.blocks}
    if len(levels) != 1:
        raise ValueError("a section must have the same degree in every block")
    wt = ()
    if action is not None and action.group.is_torus:
        wt = tuple(int(round(v)) for v in np.asarray(alpha) @ action.weight_matrix)
    return MonomialSection(alpha, levels.pop(), float(monomial_log_norm2(model, alpha)), wt)


def _compositions(n: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``n``."""
    if parts == 1:
        return np.array([[n]], dtype=np.int64)
    rows = []
    for first in range(n, -1, -1):
        rest = _compositions(n - first, parts - 1)
        rows.append(np.column_stack([np.full(len(rest), first), rest]))
    return np.vstack(rows)


def level_multi_indices(model: QuantizedModel, n: int) -> np.ndarray:
    """Multi-indices of all level-``n`` monomials, in lexicographically decreasing order."""
    per_block = [_compositions(n, d + 1) for d in model.factors]
    out = per_block[0]
    for blk in per_block[1:]:
        out = np.hstack([np.repeat(out, len(blk), axis=0), np.tile(blk, (len(out), 1))])
    return out


def _block_products(model: QuantizedModel, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return np.stack([np.sum(x[..., b] * np.conj(y[..., b]), axis=-1) for b in model.blocks], axis=-1)


def _log_level_coefficient(model: QuantizedModel, n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    out = 0.0
    for d in model.factors:
        out = out + gammaln(n + d + 1) - gammaln(n + 1) - gammaln(d + 1) - np.log(model.factor_volume(d))
    return out


def szego_level_kernel(model: QuantizedModel, k: int, x, y) -> np.ndarray:
    """Closed-form level-``k`` Szegő kernel ``Pi_k(x, y)`` (batched over points)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    p = _block_products(model, x, y)
    t = np.prod(p, axis=-1)
    return np.exp(_log_level_coefficient(model, k)) * t**k


def _monomial_values(model: QuantizedModel, alphas: np.ndarray, log_norm2: np.ndarray, x) -> np.ndarray:
    """Orthonormal monomials ``z^alpha/|z^alpha|`` at points ``x``; shape ``(P, M)``."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    zero = x == 0
    logx = np.log(np.where(zero, 1.0, x))
    L = logx @ alphas.T.astype(float) - 0.5 * log_norm2[None, :]
    vals = np.exp(L)
    if np.any(zero):
        hit = (zero.astype(float) @ (alphas.T > 0).astype(float)) > 0
        vals[hit] = 0.0
    return vals


def level_kernel_by_basis(model: QuantizedModel, k: int, x, y) -> np.ndarray:
    """Level kernel summed over the orthonormal monomial basis (oracle for the closed form)."""
    A = level_multi_indices(model, k)
    ln = monomial_log_norm2(model, A)
    ex = _monomial_values(model, A, ln, x)
    ey = _monomial_values(model, A, ln, y)
    return np.sum(ex * np.conj(ey), axis=-1)


# --------------------------------------------------------------------------
# isotype bases


@dataclass(frozen=True)
class IsotypeBasis:
    """Orthonormal basis of ``H(X)_{k nu}``.

    Members are ``s_j = sum_a coefficients[j, a] z^{alpha_a}/|z^{alpha_a}|``;
    ``coefficients`` is ``None`` when every member is a single monomial.
    """

    model: QuantizedModel
    action: LinearAction
    nu: lg.WeightVector
    k: int
    multi_indices: np.ndarray
    levels: np.ndarray
    log_norm2: np.ndarray
    coefficients: np.ndarray = None

    @property
    def dimension(self) -> int:
        if self.coefficients is None:
            return len(self.multi_indices)
        return self.coefficients.shape[0]

    @property
    def members(self) -> list:
        """Monomial sections underlying the basis (the members themselves when no coefficients)."""
        return [
            MonomialSection(tuple(int(a) for a in al), int(n), float(ln),
                            tuple(int(round(v)) for v in al @ self.action.weight_matrix)
                            if self.action.group.is_torus else ())
            for al, n, ln in zip(self.multi_indices, self.levels, self.log_norm2)
        ]


def level_range(action: LinearAction, nu: lg.WeightVector, k: int) -> tuple:
    """Inclusive bounds ``(n_lo, n_hi)`` on the levels meeting the isotype ``k nu``.

    Uses ``0 notin Phi(M)``: for a torus, with ``u`` the unit vector towards the
    point of the moment polytope closest to 0, every weight ``lambda`` of a
    level-``n`` monomial satisfies ``n m_lo <= <lambda, u> <= n m_hi``.  For
    SU(2), a highest weight ``lambda`` at level ``n`` satisfies
    ``n min|Phi| <= |lambda| <= n max|Phi|``.  Returns ``(1, 0)`` (empty) when no
    level can occur.
    """
    lam = k * nu.covector
    if action.group.is_torus:
        P = torus_vertex_weights(action)
        dist, p = _min_norm_point(P)
        if dist <= 0:
            raise RuntimeError("level enumeration is unbounded: 0 lies in the moment image")
        u = p / np.linalg.norm(p)
        m_lo, m_hi = float(np.min(P @ u)), float(np.max(P @ u))
        if m_lo <= 0:
            raise RuntimeError("level enumeration is unbounded: 0 lies in the moment image")
        a = float(lam @ u)
        if np.allclose(lam, 0):
            return (0, 0)
        if a <= 0:
            return (1, 0)
        return (int(np.ceil(a / m_hi - 1e-9)), int(np.floor(a / m_lo + 1e-9)))
    lo, hi = moment_norm_range(action)
    if lo <= 1e-9:
        raise RuntimeError("level enumeration is unbounded: 0 lies in the moment image")
    a = float(np.linalg.norm(lam))
    if a == 0:
        return (0, 0)
    return (int(np.ceil(a / hi - 1e-6)), int(np.floor(a / lo + 1e-6)))


def _torus_enumerate(action: LinearAction, nu: lg.WeightVector, k: int, n_lo: int, n_hi: int) -> np.ndarray:
    """Nonnegative integer solutions of the weight and level equations."""
    model = action.model
    N = model.n_coords
    W = action.weight_matrix
    rows = [W.T]
    b = [k * np.asarray(nu.components, dtype=float)]
    blk0 = np.zeros(N)
    blk0[model.blocks[0]] = 1
    for blk in model.blocks[1:]:
        r = -blk0.copy()
        r[blk] += 1
        rows.append(r[None, :])
        b.append([0.0])
    A = np.vstack(rows)
    b = np.concatenate(b)
    if n_hi < n_lo:
        return np.zeros((0, N), dtype=np.int64)
    # independent rows, then pivot columns
    _, R, prow = qr(A.T, pivoting=True, mode="economic")
    rank = int(np.sum(np.abs(np.diag(R)) > 1e-9 * max(1.0, abs(R[0, 0]))))
    A_ind, b_ind = A[prow[:rank]], b[prow[:rank]]
    _, R2, pcol = qr(A_ind, pivoting=True, mode="economic")
    piv = np.sort(pcol[:rank])
    free = np.array([c for c in range(N) if c not in set(piv)], dtype=int)
    Ainv = np.linalg.inv(A_ind[:, piv])
    sols = []
    grids = [np.arange(n_hi + 1)] * len(free)
    total = (n_hi + 1) ** len(free)
    chunk = 1 << 20
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        F = np.stack(np.unravel_index(idx, [n_hi + 1] * len(free)), axis=-1) if len(free) else np.zeros((1, 0), int)
        rhs = b_ind[None, :] - F @ A_ind[:, free].T
        P = rhs @ Ainv.T
        Pr = np.round(P)
        ok = np.all(np.abs(P - Pr) < 1e-7, axis=1) & np.all(Pr >= 0, axis=1)
        if not np.any(ok):
            continue
        full = np.zeros((int(ok.sum()), N), dtype=np.int64)
        full[:, piv] = Pr[ok].astype(np.int64)
        full[:, free] = F[ok]
        sols.append(full)
        if not len(free):
            break
    if not sols:
        return np.zeros((0, N), dtype=np.int64)
    S = np.vstack(sols)
    # exact verification of the integer constraints
    assert np.all(S @ np.rint(A.T).astype(np.int64) == np.rint(b).astype(np.int64)[None, :])
    lev = S[:, model.blocks[0]].sum(axis=1)
    if np.any(lev > n_hi) or np.any(lev < n_lo):
        raise RuntimeError("isotype level outside the certified range; the moment image contains 0")
    order = np.lexsort(S.T[::-1])[::-1]
    return S[order]


def _function_derivation(action: LinearAction, X, alphas, index, log_norm2):
    """Matrix of the derivation ``f -> -d f(A_X x)`` from the monomials ``alphas``
    into the monomials indexed by ``index``, in orthonormal coordinates."""
    A = np.tensordot(np.asarray(X, dtype=complex), action.generators, axes=(0, 0))
    out = np.zeros((len(index), len(alphas)), dtype=complex)
    N = alphas.shape[1]
    nz = np.argwhere(np.abs(A) > 0)
    for j, al in enumerate(alphas):
        for c, bcol in nz:
            if al[c] == 0:
                continue
            beta = al.copy()
            beta[c] -= 1
            beta[bcol] += 1
            key = beta.tobytes()
            i = index.get(key)
            if i is None:
                continue
            out[i, j] += -A[c, bcol] * al[c] * np.exp(0.5 * (log_norm2[1][i] - log_norm2[0][j]))
    return out


def _su2_isotype(action: LinearAction, nu: lg.WeightVector, k: int, n_lo: int, n_hi: int):
    model = action.model
    mu = action.su2_coordinate_weights
    lam = k * nu.components[0]
    all_alpha, all_coef_blocks = [], []
    F = np.array([0, 1, 1j])  # e2 + i e3 lowers the weight by 2
    for n in range(max(n_lo, 0), n_hi + 1):
        A = level_multi_indices(model, n)
        wts = np.rint(-(A @ mu)).astype(int)
        keep = (np.abs(wts) <= lam) & ((wts - lam) % 2 == 0)
        A, wts = A[keep], wts[keep]
        if not np.any(wts == lam):
            continue
        ln = monomial_log_norm2(model, A)
        index = {a.tobytes(): i for i, a in enumerate(A)}
        top = np.where(wts == lam)[0]
        # highest-weight vectors: kernel of the raising operator on the top weight space
        raise_cols = _raise_matrix(action, A[top], n, lam)
        if raise_cols.shape[0] == 0:
            hw = np.eye(len(top), dtype=complex)
        else:
            u, s, vh = np.linalg.svd(raise_cols)
            tol = 1e-9 * max(1.0, s[0] if len(s) else 1.0)
            r = int(np.sum(s > tol))
            hw = vh[r:].conj().T
        vecs = []
        lower = _function_derivation(action, F, A, index, (ln, ln))
        for h in hw.T:
            v = np.zeros(len(A), dtype=complex)
            v[top] = h
            v /= np.linalg.norm(v)
            chain = [v]
            for _ in range(lam):
                v = lower @ v
                v /= np.linalg.norm(v)
                chain.append(v)
            vecs.extend(chain)
        C = _mgs(np.array(vecs))
        all_alpha.append(A)
        all_coef_blocks.append(C)
    if not all_alpha:
        return np.zeros((0, model.n_coords), dtype=np.int64), np.zeros((0, 0), dtype=complex)
    alphas = np.vstack(all_alpha)
    m = sum(c.shape[0] for c in all_coef_blocks)
    C = np.zeros((m, len(alphas)), dtype=complex)
    r0 = c0 = 0
    for A, Cb in zip(all_alpha, all_coef_blocks):
        C[r0:r0 + Cb.shape[0], c0:c0 + len(A)] = Cb
        r0 += Cb.shape[0]
        c0 += len(A)
    return alphas, C


def _raise_matrix(action, top_alpha, n, lam):
    """Raising operator from the top weight space into weight ``lam + 2`` at level ``n``."""
    model = action.model
    mu = action.su2_coordinate_weights
    A = level_multi_indices(model, n)
    wts = np.rint(-(A @ mu)).astype(int)
    up = A[wts == lam + 2]
    if len(up) == 0:
        return np.zeros((0, len(top_alpha)), dtype=complex)
    index = {a.tobytes(): i for i, a in enumerate(up)}
    ln_top = monomial_log_norm2(model, top_alpha)
    ln_up = monomial_log_norm2(model, up)
    return _function_derivation(action, np.array([0, 1, -1j]), top_alpha, index, (ln_top, ln_up))


def _mgs(V: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Modified Gram-Schmidt on rows, with one reorthogonalization pass."""
    out = []
    for v in V:
        w = v.astype(complex).copy()
        for _ in range(2):
            for q in out:
                w = w - np.vdot(q, w) * q
        nrm = np.linalg.norm(w)
        if nrm > tol:
            out.append(w / nrm)
    return np.array(out) if out else np.zeros((0, V.shape[1]), dtype=complex)


def _cache_path(action, nu, k):
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    key = json.dumps(
        {
            "factors": action.model.factors,
            "measure": action.model.measure,
            "group": [action.group.kind, action.group.rank],
            "weights": action.weights,
            "shift": action.shift,
            "blocks": action.blocks,
            "nu": nu.components,
            "k": int(k),
            "v": 1,
        },
        sort_keys=True,
    )
    h = hashlib.sha256(key.encode()).hexdigest()[:24]
    return os.path.join(root, f"isotype-{h}.npz")


def isotype_basis(action: LinearAction, nu: lg.WeightVector, k: int, levels=None) -> IsotypeBasis:
    """Orthonormal basis of the ``k nu`` isotype across all structure-circle levels.

    ``levels`` optionally restricts to a subset of levels (sensitivity runs).
    Bases are cached as ``.npz`` files when the environment variable named by
    :data:`CACHE_ENV` points to a directory.
    """
    if int(k) != k or k < 0:
        raise ValueError("k must be a nonnegative integer")
    model = action.model
    path = _cache_path(action, nu, k) if levels is None else None
    if path and os.path.exists(path):
        with np.load(path) as z:
            alphas = z["alphas"]
            C = z["coefficients"] if "coefficients" in z.files else None
    else:
        n_lo, n_hi = level_range(action, nu, k)
        if action.group.is_torus:
            alphas = _torus_enumerate(action, nu, k, n_lo, n_hi)
            C = None
        else:
            alphas, C = _su2_isotype(action, nu, k, n_lo, n_hi)
        if path:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            payload = {"alphas": alphas}
            if C is not None:
                payload["coefficients"] = C
            np.savez(path, **payload)
    lev = alphas[:, model.blocks[0]].sum(axis=1) if len(alphas) else np.zeros(0, dtype=np.int64)
    if levels is not None:
        keep = np.isin(lev, np.asarray(list(levels)))
        alphas, lev = alphas[keep], lev[keep]
        if C is not None:
            C = C[:, keep]
            C = C[np.linalg.norm(C, axis=1) > 1e-12]
            C = _mgs(C)
    ln = monomial_log_norm2(model, alphas) if len(alphas) else np.zeros(0)
    return IsotypeBasis(model, action, nu, int(k), alphas, lev, ln, C)


def basis_values(basis: IsotypeBasis, x) -> np.ndarray:
    """Values ``s_j(x)`` of the basis members, shape ``(P, dimension)``."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    if basis.dimension == 0:
        return np.zeros((x.shape[0], 0), dtype=complex)
    e = _monomial_values(basis.model, basis.multi_indices, basis.log_norm2, x)
    if basis.coefficients is None:
        return e
    return e @ basis.coefficients.T


def equivariant_kernel(basis: IsotypeBasis, x, y) -> np.ndarray:
    """``Pi_{k nu}(x, y) = sum_j s_j(x) conj(s_j(y))`` (batched over point pairs)."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    single = x.ndim == 1 and y.ndim == 1
    sx = basis_values(basis, x)
    sy = basis_values(basis, y)
    out = np.sum(sx * np.conj(sy), axis=-1)
    return out[0] if single else out


# --------------------------------------------------------------------------
# character route


def required_degree(action: LinearAction, nu: lg.WeightVector, k: int, class_functions: bool = False) -> int:
    """Haar-rule degree needed by the character route for the isotype ``k nu``."""
    n_lo, n_hi = level_range(action, nu, k)
    if n_hi < n_lo:
        return 1
    lam = k * np.asarray(nu.components, dtype=float)
    if action.group.is_torus:
        W = action.weight_matrix
        model = action.model
        lo = np.zeros(action.group.rank)
        hi = np.zeros(action.group.rank)
        for blk in model.blocks:
            lo += W[blk].min(axis=0)
            hi += W[blk].max(axis=0)
        # W already contains the shift on block 0
        deg = 0
        for n in (n_lo, n_hi):
            deg = max(deg, np.max(np.abs(n * hi - lam)), np.max(np.abs(n * lo - lam)))
        return int(np.ceil(deg))
    mu_max = int(np.max(np.abs(action.su2_coordinate_weights)))
    n_factors = len(action.model.factors)
    return int(lam[0] + n_hi * mu_max * n_factors)


def _coerce_rule(action, nu, k, rule, class_functions):
    need = required_degree(action, nu, k, class_functions)
    if rule is None:
        return lg.haar_quadrature(action.group, need, class_functions_only=class_functions)
    if rule.exact_degree < need:
        raise ValueError(
            f"Haar rule exact to degree {rule.exact_degree}, but degree {need} is needed "
            f"for the isotype k nu = {k} x {nu.components}"
        )
    if class_functions and not action.group.is_torus and not rule.class_functions_only:
        raise ValueError("a class-function rule is required here")
    if not class_functions and rule.class_functions_only:
        raise ValueError("the full group rule is required for kernels")
    return rule


def _inverse_elements(action, nodes):
    if action.group.is_torus:
        return -np.asarray(nodes)
    return np.conj(np.swapaxes(nodes, -1, -2))


def equivariant_kernel_by_characters(action: LinearAction, nu: lg.WeightVector, k: int, x, y,
                                     rule: lg.HaarQuadrature = None, haar: str = "probability") -> np.ndarray:
    """Equivariant kernel from the character average of level kernels.

    ``haar="probability"`` integrates against the probability Haar measure
    (the normalization under which the average is the isotypic projector);
    ``haar="phi"`` uses the Riemannian volume of the invariant product, which
    multiplies the result by ``vol(G)``.
    """
    model = action.model
    rule = _coerce_rule(action, nu, k, rule, False)
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    n_lo, n_hi = level_range(action, nu, k)
    d_k = lg.weyl_dimension(action.group, nu, k)
    chi_bar = np.conj(lg.character(action.group, nu, k, rule.nodes))
    ginv = _inverse_elements(action, rule.nodes)
    levels = np.arange(max(n_lo, 0), n_hi + 1)
    coef = np.exp(_log_level_coefficient(model, levels))
    out = np.zeros(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), dtype=complex)
    if len(levels) == 0:
        return out
    # process nodes in chunks to limit memory
    step = max(1, 200000 // max(1, x.shape[0] * model.n_coords))
    for s in range(0, len(rule.weights), step):
        g = ginv[s:s + step]
        U = group_matrix(action, g)
        if action.group.is_torus:
            xm = U[:, None, :] * x[None, :, :]
        else:
            xm = np.einsum("qij,pj->qpi", U, x)
        t = np.prod(_block_products(model, xm, y[None, :, :]), axis=-1)  # (q, p)
        series = np.zeros(t.shape, dtype=complex)
        tp = t ** levels[0]
        for c in coef:
            series += c * tp
            tp = tp * t
        out += np.tensordot(rule.weights[s:s + step] * chi_bar[s:s + step], series, axes=(0, 0))
    out *= d_k
    if haar == "phi":
        out *= action.group.volume_G
    elif haar != "probability":
        raise ValueError("haar must be 'probability' or 'phi'")
    return out


def character_projector(action: LinearAction, nu: lg.WeightVector, k: int, f, x, rule: lg.HaarQuadrature = None):
    """Apply ``d_{k nu} int conj(chi_{k nu}(g)) f(mu~_{g^-1} x) dg`` to a callable ``f``.

    ``rule`` must integrate ``chi_{k nu}`` times ``f o mu~`` exactly; by default
    a rule of degree ``k |nu| + 2 * (max level) * (max coordinate weight)`` is used.
    """
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    if rule is None:
        deg = required_degree(action, nu, k) + 2 * int(np.max(np.abs(action.weight_matrix if action.group.is_torus else action.su2_coordinate_weights))) * (level_range(action, nu, k)[1] + 1)
        rule = lg.haar_quadrature(action.group, deg)
    d_k = lg.weyl_dimension(action.group, nu, k)
    chi_bar = np.conj(lg.character(action.group, nu, k, rule.nodes))
    ginv = _inverse_elements(action, rule.nodes)
    U = group_matrix(action, ginv)
    if action.group.is_torus:
        xm = U[:, None, :] * x[None, :, :]
    else:
        xm = np.einsum("qij,pj->qpi", U, x)
    vals = np.asarray(f(xm.reshape(-1, x.shape[-1]))).reshape(len(rule.weights), x.shape[0], -1)
    return d_k * np.tensordot(rule.weights * chi_bar, vals, axes=(0, 0))


def _complete_symmetric(t_cols, n_max):
    """``h_n`` of the variables in ``t_cols`` (list of node arrays) for ``n <= n_max``."""
    Q = t_cols[0].shape[0]
    H = np.zeros((n_max + 1, Q), dtype=complex)
    H[0] = 1
    for t in t_cols:
        for n in range(1, n_max + 1):
            H[n] += t * H[n - 1]
    return H


def level_traces(action: LinearAction, nodes, n_max: int) -> np.ndarray:
    """Trace of ``g`` on each level ``0..n_max`` of ``H(X)``, shape ``(n_max + 1, Q)``.

    Nodes are torus angles or SU(2) class angles.
    """
    model = action.model
    if action.group.is_torus:
        phases = np.exp(1j * np.asarray(nodes) @ action.weight_matrix.T)  # (Q, N)
    else:
        theta = np.asarray(nodes, dtype=float)
        phases = np.exp(-1j * np.outer(theta, action.su2_coordinate_weights))
    out = np.ones((n_max + 1, phases.shape[0]), dtype=complex)
    for blk in model.blocks:
        cols = [phases[:, c] for c in range(blk.start, blk.stop)]
        out *= _complete_symmetric(cols, n_max)
    return out


def isotype_dimension_by_characters(action: LinearAction, nu: lg.WeightVector, k: int,
                                    rule: lg.HaarQuadrature = None) -> float:
    """``d_{k nu} sum_n int conj(chi_{k nu}) Tr(g | level n) dg`` before rounding."""
    n_lo, n_hi = level_range(action, nu, k)
    if n_hi < n_lo:
        return 0.0
    rule = _coerce_rule(action, nu, k, rule, True)
    tr = level_traces(action, rule.nodes, n_hi)[max(n_lo, 0):]
    chi_bar = np.conj(lg.character(action.group, nu, k, rule.nodes))
    val = lg.weyl_dimension(action.group, nu, k) * np.sum(tr @ (rule.weights * chi_bar))
    return float(val.real)


def isotype_dimension(action: LinearAction, nu: lg.WeightVector, k: int) -> int:
    """Isotype dimension by enumeration, confirmed by the character route.

    Raises ``RuntimeError`` when the two disagree.
    """
    enum = isotype_basis(action, nu, k).dimension
    char = isotype_dimension_by_characters(action, nu, k)
    if abs(char - round(char)) > 1e-6 or int(round(char)) != enum:
        raise RuntimeError(f"isotype dimension mismatch: enumeration {enum}, characters {char!r}")
    return enum


# --------------------------------------------------------------------------
# quadrature on X


def _simplex_rule(d: int, degree: int):
    """Probability rule on the simplex ``{t in R^{d+1}_{>=0}, sum t = 1}`` exact to ``degree``."""
    n = degree // 2 + 1
    us, ws = [], []
    for i in range(1, d + 1):
        x, w = roots_jacobi(n, d - i, 0)
        us.append(0.5 * (x + 1))
        ws.append(w / w.sum())
    grids = np.meshgrid(*us, indexing="ij")
    W = np.ones_like(grids[0])
    for i, w in enumerate(ws):
        shape = [1] * d
        shape[i] = n
        W = W * w.reshape(shape)
    U = np.stack([g.ravel() for g in grids], axis=-1)
    T = np.zeros((len(U), d + 1))
    rem = np.ones(len(U))
    for i in range(d):
        T[:, i] = rem * U[:, i]
        rem = rem * (1 - U[:, i])
    T[:, d] = rem
    return T, W.ravel()


def sphere_quadrature(model: QuantizedModel, degree: int):
    """Nodes on ``X`` and weights (summing to ``vol(X)``) integrating every
    ``z^alpha conj(z^beta)`` with block degrees at most ``degree`` exactly."""
    pts, wts = None, None
    for d in model.factors:
        T, W = _simplex_rule(d, degree)
        N = degree + 1
        ang = 2 * np.pi * np.arange(N) / N
        angs = np.stack([g.ravel() for g in np.meshgrid(*([ang] * (d + 1)), indexing="ij")], axis=-1)
        z = (np.sqrt(T)[:, None, :] * np.exp(1j * angs)[None, :, :]).reshape(-1, d + 1)
        w = (W[:, None] * np.full(len(angs), 1.0 / len(angs))[None, :]).ravel() * model.factor_volume(d)
        if pts is None:
            pts, wts = z, w
        else:
            pts = np.hstack([np.repeat(pts, len(z), axis=0), np.tile(z, (len(pts), 1))])
            wts = np.repeat(wts, len(w)) * np.tile(w, len(wts))
    return pts, wts
