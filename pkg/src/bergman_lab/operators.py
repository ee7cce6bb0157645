"""Discretized operators on a mesh and their norms.

Matrix convention: entry ``(i, j) = K(node_i, node_j) * quad_weight_j`` so that
``T @ f`` approximates ``int K(z_i, w) f(w) dA_alpha(w)``.  The quadrature
adjoint of ``T`` is ``W^-1 T^H W`` with ``W = diag(quad_weights)``.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .geometry import Mesh, box_rule, rect_measure, system_shift
from .symbols import Symbol
from .weights import Weight

MAX_N = 8192


class OperatorError(ValueError):
    pass


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BERGMAN_LAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class DiscretizedOperator:
    """Matrix acting on cell-sampled functions of a mesh."""

    matrix: np.ndarray | sparse.spmatrix
    mesh: Mesh
    kernel: str
    alpha: float
    params: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, f):
        return self.matrix @ f

    def dense(self) -> np.ndarray:
        M = self.matrix
        return M.toarray() if sparse.issparse(M) else np.asarray(M)

    def adjoint(self) -> "DiscretizedOperator":
        """``dA_alpha`` quadrature adjoint ``W^-1 M^H W``."""
        w = self.mesh.quad_weights
        M = self.dense()
        return DiscretizedOperator((M.conj().T * w[None, :]) / w[:, None], self.mesh,
                                   self.kernel + "^*", self.alpha, dict(self.params))

    def like(self, matrix, kernel: str, **params) -> "DiscretizedOperator":
        p = dict(self.params)
        p.update(params)
        return DiscretizedOperator(matrix, self.mesh, kernel, self.alpha, p)


def _check_size(mesh: Mesh, allow_large: bool):
    if mesh.N > MAX_N and not allow_large:
        raise OperatorError(f"mesh has {mesh.N} cells, above the dense cap {MAX_N}")


def _assemble(mesh: Mesh, row_fn, dtype, allow_large=False) -> np.ndarray:
    """Fill the matrix by row blocks, optionally on a thread pool."""
    _check_size(mesh, allow_large)
    N = mesh.N
    out = np.empty((N, N), dtype=dtype)
    blocks = [(s, min(s + 512, N)) for s in range(0, N, 512)]

    def work(b):
        s, e = b
        out[s:e] = row_fn(mesh.nodes[s:e, None], mesh.nodes[None, :])

    n = _threads()
    if n > 1:
        with ThreadPoolExecutor(n) as ex:
            list(ex.map(work, blocks))
    else:
        for b in blocks:
            work(b)
    return out


def bergman_kernel(z, w, alpha: float):
    """``i^{2+alpha} / (z - conj(w))^{2+alpha}`` (principal branch)."""
    d = np.asarray(z) - np.conj(w)
    if float(alpha).is_integer():
        return 1j ** int(2 + alpha) / d ** int(2 + alpha)
    return (1j / d) ** (2 + alpha)


def assemble_bergman(mesh: Mesh, alpha: float | None = None, allow_large=False) -> DiscretizedOperator:
    """Bergman projection ``P_alpha``.

    The kernel matrix is symmetrized to be exactly Hermitian, so ``P`` is
    exactly self-adjoint in the quadrature inner product.
    """
    alpha = mesh.alpha if alpha is None else alpha
    if not alpha > -1:
        raise OperatorError("alpha must exceed -1")
    K = _assemble(mesh, lambda z, w: bergman_kernel(z, w, alpha), complex, allow_large)
    K = 0.5 * (K + K.conj().T)
    return DiscretizedOperator(K * _weights(mesh, alpha)[None, :], mesh, "bergman", alpha)


def _weights(mesh: Mesh, alpha: float) -> np.ndarray:
    return mesh.quad_weights if alpha == mesh.alpha else mesh.weights_for(alpha)


def assemble_berezin_plus(mesh: Mesh, alpha: float | None = None, allow_large=False) -> DiscretizedOperator:
    """Positive operator ``P_alpha^+`` with kernel ``|z - conj(w)|^-(2+alpha)``."""
    alpha = mesh.alpha if alpha is None else alpha
    K = _assemble(mesh, lambda z, w: np.abs(bergman_kernel(z, w, alpha)), float, allow_large)
    K = 0.5 * (K + K.T)
    return DiscretizedOperator(K * _weights(mesh, alpha)[None, :], mesh, "berezin_plus", alpha)


def assemble_q_eps(mesh: Mesh, alpha: float | None = None, eps: float = 0.1,
                   allow_large=False) -> DiscretizedOperator:
    """``Q^eps`` with kernel ``(Im z)^-eps (Im w)^-eps / |z - conj(w)|^(2+alpha-2eps)``."""
    alpha = mesh.alpha if alpha is None else alpha
    if not 0 < eps < (alpha + 1) / 2:
        raise OperatorError("eps must lie in (0, (alpha+1)/2)")

    def rows(z, w):
        return (z.imag ** -eps) * (w.imag ** -eps) / np.abs(z - np.conj(w)) ** (2 + alpha - 2 * eps)

    K = _assemble(mesh, rows, float, allow_large)
    K = 0.5 * (K + K.T)
    return DiscretizedOperator(K * _weights(mesh, alpha)[None, :], mesh, "q_eps", alpha,
                               {"eps": eps})


# ---------------------------------------------------------------------------
# positive dyadic operators


def _normalizer(fam, mesh: Mesh, normalize: str):
    if normalize == "covered":
        return fam.covered_measure
    if normalize == "exact":
        return fam.exact_measure
    raise OperatorError(f"unknown normalization {normalize!r}")


def sparse_averaging(mesh: Mesh, system: str = "D1", normalize: str = "covered") -> DiscretizedOperator:
    """``A_D f(z) = sum_I <|f|>_{Q_I} 1_{Q_I}(z)`` as a sparse matrix.

    ``normalize="covered"`` divides by the covered measure of each box so
    that averages of constants are exact; ``"exact"`` uses ``A_alpha(Q_I)``.
    Callers pass ``|f|``.
    """
    fam = mesh.family(system)
    E = fam.incidence
    m = _normalizer(fam, mesh, normalize)
    M = (E.T @ sparse.diags(1.0 / m) @ E @ sparse.diags(mesh.quad_weights)).tocsr()
    return DiscretizedOperator(M, mesh, f"sparse_{system}", mesh.alpha,
                               {"system": system, "normalize": normalize})


def sparse_b_forms(mesh: Mesh, system: str, b: Symbol, normalize: str = "covered"):
    """Sparse forms ``A_b`` and ``A_b^*`` of the commutator domination.

    ``A_b f(z) = sum_I <|b - b_Q| |f|>_Q 1_Q(z)`` and
    ``A_b^* f(z) = sum_I |b(z) - b_Q| <|f|>_Q 1_Q(z)``.
    """
    fam = mesh.family(system)
    E = fam.incidence.tocoo()
    wq = mesh.quad_weights
    bv = b.at_nodes(mesh)
    bq = fam.averages(bv, wq)
    dev = np.abs(bv[E.col] - bq[E.row])
    D = sparse.csr_matrix((dev, (E.row, E.col)), shape=E.shape)
    Einv = sparse.diags(1.0 / _normalizer(fam, mesh, normalize))
    W = sparse.diags(wq)
    Ab = (fam.incidence.T @ Einv @ D @ W).tocsr()
    Ab_star = (D.T @ Einv @ fam.incidence @ W).tocsr()
    return (DiscretizedOperator(Ab, mesh, f"A_b_{system}", mesh.alpha, {"symbol": b.name}),
            DiscretizedOperator(Ab_star, mesh, f"A_b*_{system}", mesh.alpha, {"symbol": b.name}))


def dyadic_maximal(mesh: Mesh, system: str, f, normalize: str = "covered") -> np.ndarray:
    """Nodewise maximum of ``<|f|>_{Q_I}`` over the boxes containing the node."""
    fam = mesh.family(system)
    avg = (fam.incidence @ (np.abs(f) * mesh.quad_weights)) / _normalizer(fam, mesh, normalize)
    anc = fam.ancestors
    vals = np.where(anc >= 0, avg[np.maximum(anc, 0)], 0.0)
    return vals.max(axis=1)


def sparse_tower(mesh: Mesh, system: str, f, b: Symbol | None = None, levels: int = 30):
    """Contribution of the boxes above the mesh to the sparse sums at each node.

    For ``f`` supported on the mesh the averages over boxes of level
    ``k > k_max`` are exact sums over the nodes, normalized by the full box
    measure.  Returns ``(plain, A_b, A_b^*)``; the last two are ``None``
    without a symbol.  Box means ``b_Q`` come from :func:`box_rule`.
    """
    x = mesh.nodes.real
    fw = np.abs(f) * mesh.quad_weights
    plain = np.zeros(mesh.N)
    ab = np.zeros(mesh.N) if b is not None else None
    abs_ = np.zeros(mesh.N) if b is not None else None
    bv = b.at_nodes(mesh) if b is not None else None
    for k in range(mesh.cfg.k_max + 1, mesh.cfg.k_max + 1 + levels):
        h = 2.0**k
        s = system_shift(system, k)
        idx = np.floor((x - s) / h).astype(np.int64)
        keys, inv = np.unique(idx, return_inverse=True)
        meas = float(rect_measure(0.0, h, 0.0, h, mesh.alpha))
        avg = np.bincount(inv, fw, len(keys)) / meas
        plain += avg[inv]
        if b is None:
            continue
        bq = np.empty(len(keys), complex)
        for t, key in enumerate(keys):
            x0 = s + key * h
            Z, W = box_rule(x0, x0 + h, 0.0, h, mesh.alpha, n=12, layers=40)
            bq[t] = np.sum(b(Z) * W) / np.sum(W)
        dev = np.abs(bv - bq[inv])
        ab += (np.bincount(inv, dev * fw, len(keys)) / meas)[inv]
        abs_ += dev * avg[inv]
    return plain, ab, abs_


# ---------------------------------------------------------------------------
# commutators and Hankel operators


def commutator(P: DiscretizedOperator, b: Symbol, mesh: Mesh | None = None) -> DiscretizedOperator:
    """``[b, P] = diag(b) P - P diag(b)``."""
    mesh = P.mesh if mesh is None else mesh
    bv = b.at_nodes(mesh)
    M = P.dense()
    return P.like(bv[:, None] * M - M * bv[None, :], f"[b,{P.kernel}]", symbol=b.name)


def hankel(P: DiscretizedOperator, b: Symbol, mesh: Mesh | None = None) -> DiscretizedOperator:
    """``H_b = (I - P) diag(b) P``."""
    mesh = P.mesh if mesh is None else mesh
    bv = b.at_nodes(mesh)
    M = P.dense()
    BP = bv[:, None] * M
    return P.like(BP - M @ BP, f"H_b[{P.kernel}]", symbol=b.name)


# ---------------------------------------------------------------------------
# kernel splitting


def _s(u):
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def bump(t, eta: float):
    """Smooth bump: 1 on ``[0, eta/2]``, 0 on ``[eta, inf)``."""
    return _s((eta - np.asarray(t, float)) / (eta / 2))


def kernel_split(mesh: Mesh, alpha: float | None = None, eta: float = 0.5,
                 P: DiscretizedOperator | None = None) -> list[DiscretizedOperator]:
    """Four pieces ``K^t`` of the Bergman kernel.

    With ``a = phi(|z - conj(w)|)`` and ``c = phi(1/(|z| + |w|))``:
    ``K^0 = a(1-c)K``, ``K^1 = a c K``, ``K^2 = (1-a) c K``, ``K^3 = (1-a)(1-c) K``.
    """
    alpha = mesh.alpha if alpha is None else alpha
    P = assemble_bergman(mesh, alpha) if P is None else P
    z = mesh.nodes
    a = bump(np.abs(z[:, None] - np.conj(z)[None, :]), eta)
    absz = np.abs(z)
    c = bump(1.0 / (absz[:, None] + absz[None, :]), eta)
    M = P.dense()
    pieces = [a * (1 - c), a * c, (1 - a) * c, (1 - a) * (1 - c)]
    return [P.like(p * M, f"K{t}", eta=eta) for t, p in enumerate(pieces)]


# ---------------------------------------------------------------------------
# norms


@dataclass
class WeightedNormResult:
    value: float
    iterations: int
    residual: float
    converged: bool
    vector: np.ndarray


def _scalings(mesh: Mesh, mu: Weight | None, lam: Weight | None):
    w = mesh.quad_weights
    mv = np.ones(mesh.N) if mu is None else mu.at_nodes(mesh)
    lv = np.ones(mesh.N) if lam is None else lam.at_nodes(mesh)
    return np.sqrt(lv * w), 1.0 / np.sqrt(w * mv)


def _as_matrix(T):
    return T.matrix if isinstance(T, DiscretizedOperator) else T


def conjugated_matrix(T, mu, lam, mesh: Mesh) -> np.ndarray:
    """``Lambda^{1/2} W^{1/2} T W^{-1/2} M^{-1/2}`` as a dense matrix."""
    left, right = _scalings(mesh, mu, lam)
    M = _as_matrix(T)
    M = M.toarray() if sparse.issparse(M) else M
    return left[:, None] * M * right[None, :]


def _subspace_iteration(T, left, right, k: int, block: int, tol: float, max_iter: int,
                        seed: int):
    M = _as_matrix(T)
    N = M.shape[0]
    rng = np.random.default_rng(seed)
    is_complex = np.iscomplexobj(M) if not sparse.issparse(M) else np.iscomplexobj(M.data)

    def C(X):
        return left[:, None] * (M @ (right[:, None] * X))

    def CH(Y):
        Z = left[:, None] * Y
        if sparse.issparse(M):
            out = (M.conj().T @ Z)
        else:
            out = (Z.conj().T @ M).conj().T
        return right[:, None] * out

    b = min(block, N)
    X = rng.standard_normal((N, b))
    if is_complex:
        X = X + 1j * rng.standard_normal((N, b))
    X, _ = np.linalg.qr(X)
    theta = np.zeros(b)
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        G = CH(C(X))
        H = X.conj().T @ G
        H = 0.5 * (H + H.conj().T)
        vals, vecs = np.linalg.eigh(H)
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
        V = X @ vecs
        GV = G @ vecs
        theta = np.maximum(vals, 0.0)
        scale = max(theta[0], np.finfo(float).tiny)
        R = GV[:, :k] - V[:, :k] * vals[None, :k]
        res = float(np.max(np.linalg.norm(R, axis=0)) / scale)
        if res <= tol:
            return np.sqrt(theta[:k]), V[:, :k], it, res, True
        X, _ = np.linalg.qr(GV)
    return np.sqrt(theta[:k]), V[:, :k], it, res, False


def weighted_operator_norm(T, mu: Weight | None, lam: Weight | None, mesh: Mesh,
                           tol: float = 1e-8, max_iter: int = 5000, seed: int = 0,
                           block: int = 4) -> WeightedNormResult:
    """``||T||_{L^2(mu) -> L^2(lambda)}`` by block power iteration with Rayleigh-Ritz.

    The returned vector is the extremal function mapped back to ``L^2(mu)``.
    """
    left, right = _scalings(mesh, mu, lam)
    s, V, it, res, ok = _subspace_iteration(T, left, right, 1, block, tol, max_iter, seed)
    return WeightedNormResult(float(s[0]), it, res, ok, right * V[:, 0])


def singular_values(T, mu: Weight | None, lam: Weight | None, mesh: Mesh, k: int,
                    tol: float = 1e-8, max_iter: int = 5000, seed: int = 0) -> np.ndarray:
    """Top ``k`` singular values of the weighted conjugation, decreasing.

    Subspace iteration on a block of ``k + 5`` vectors with Rayleigh-Ritz
    extraction; the extra vectors play the role of deflation.
    """
    N = _as_matrix(T).shape[0]
    if k > N:
        raise OperatorError("k exceeds the matrix size")
    left, right = _scalings(mesh, mu, lam)
    s, _, _, _, _ = _subspace_iteration(T, left, right, k, min(k + 5, N), tol, max_iter, seed)
    return np.sort(s)[::-1]


def hilbert_schmidt_norm(T, mu: Weight | None, lam: Weight | None, mesh: Mesh) -> float:
    """``(sum_ij lambda_i |K_ij|^2 mu_j^-1 w_i w_j)^{1/2}`` for ``T_ij = K_ij w_j``."""
    return float(np.linalg.norm(conjugated_matrix(T, mu, lam, mesh)))


# ---------------------------------------------------------------------------
# binary dump


def dump_matrix(op: DiscretizedOperator, path: str) -> tuple[str, str]:
    """Write ``path`` (row-major little-endian complex128) and ``path.json``."""
    M = np.ascontiguousarray(op.dense(), dtype="<c16")
    M.tofile(path)
    meta = {"N": int(M.shape[0]), "kernel": op.kernel, "alpha": float(op.alpha),
            "mesh_hash": op.mesh.hash()}
    with open(path + ".json", "w") as fh:
        json.dump(meta, fh, sort_keys=True)
    return path, path + ".json"


def load_matrix(path: str) -> tuple[np.ndarray, dict]:
    with open(path + ".json") as fh:
        meta = json.load(fh)
    M = np.fromfile(path, dtype="<c16").reshape(meta["N"], meta["N"])
    return M, meta
