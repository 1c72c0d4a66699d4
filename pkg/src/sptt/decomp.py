"""Rank-revealing QC decompositions and tensor-train canonicalisation.

Two flavours are provided.  The sparse QC decomposition ``X = QC`` picks the
standard basis vectors spanning the nonzero rows of ``X`` as columns of ``Q``,
so both factors stay sparse.  The weight-orthogonal variant makes ``Q``
orthogonal with ``Q^T diag(w) Q`` diagonal for a given row weighting ``w``,
trading exact sparsity for minimal rank while keeping weighted-sparsity
bookkeeping possible through the induced core weights.

Both extend to tensor trains by sweeping the decomposition through the
components from the outside towards a chosen core position.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .tensor import (
    TensorTrain,
    _decode_floats,
    _encode_floats,
    tensor_train_from_json,
    tensor_train_to_json,
)

__all__ = [
    "DROP_RTOL",
    "QCPair",
    "CanonicalForm",
    "clean_array",
    "sparse_qc",
    "omega_qc",
    "canonicalise_sparse",
    "canonicalise_omega",
    "core_basis_matrix",
    "canonical_form_to_json",
    "canonical_form_from_json",
]

# Entries at or below DROP_RTOL times the largest magnitude are treated as
# exact zeros after sparse operations; reconstructions stay within tolerance.
DROP_RTOL = 1e-14


def clean_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    m = np.max(np.abs(x)) if x.size else 0.0
    if m == 0.0:
        return x.copy()
    out = x.copy()
    out[np.abs(out) <= DROP_RTOL * m] = 0.0
    return out


@dataclass(frozen=True)
class QCPair:
    """Factors of ``X = Q C`` with orthogonal ``Q``."""

    q: np.ndarray
    c: np.ndarray


def _as_matrix(x) -> np.ndarray:
    if hasattr(x, "to_dense"):
        x = x.to_dense()
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {x.shape}")
    return x


def sparse_qc(x) -> QCPair:
    """Sparse QC decomposition: Q selects the nonzero rows of ``X``.

    ``Q`` has the standard basis vectors ``e_s`` (s over the sorted nonzero
    row indices) as columns and ``C`` equals ``X`` with its zero rows removed,
    so ``QC = X`` exactly and ``Q^T Q = I``.
    """
    mat = clean_array(_as_matrix(x))
    nonzero_rows = np.flatnonzero(np.any(mat != 0, axis=1))
    if nonzero_rows.size == 0:
        raise ValueError("all-zero matrix has no sparse QC decomposition")
    r = nonzero_rows.size
    q = np.zeros((mat.shape[0], r))
    q[nonzero_rows, np.arange(r)] = 1.0
    return QCPair(q=q, c=mat[nonzero_rows].copy())


def omega_qc(x, omega, rank_rtol: float = 1e-12):
    """Weight-orthogonal QC decomposition of ``X`` with row weights ``omega``.

    Returns ``(QCPair, diag)`` where ``Q`` is orthogonal, ``Q^T diag(omega) Q``
    is diagonal with entries ``diag`` sorted descending, and ``C = Q^T X``.
    Construction: sparse QC, an SVD of the row-compressed factor (truncating
    singular values below ``rank_rtol`` times the largest), then the spectral
    decomposition of the compressed weight Gram matrix.  Column signs are
    fixed so each column's first nonzero entry is positive.
    """
    mat = clean_array(_as_matrix(x))
    omega = np.asarray(omega, dtype=float).reshape(-1)
    if omega.shape[0] != mat.shape[0]:
        raise ValueError("omega must have one entry per row")
    if np.any(omega < 0):
        raise ValueError("omega must be nonnegative")

    pair = sparse_qc(mat)
    c1 = pair.c
    w, s, vt = np.linalg.svd(c1, full_matrices=False)
    rank = int(np.sum(s > rank_rtol * s[0]))
    if rank == 0:
        raise ValueError("numerically zero matrix has no omega QC decomposition")
    q12 = pair.q @ w[:, :rank]

    gram = q12.T @ (omega[:, None] * q12)
    lam, u = np.linalg.eigh(gram)
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    u = u[:, order]

    q = clean_array(q12 @ u)
    for col in range(q.shape[1]):
        nz = np.flatnonzero(q[:, col])
        if nz.size and q[nz[0], col] < 0:
            q[:, col] = -q[:, col]
            u[:, col] = -u[:, col]
    c = clean_array(q.T @ mat)
    return QCPair(q=q, c=c), np.maximum(lam, 0.0)


@dataclass(frozen=True)
class CanonicalForm:
    """Tensor train with orthogonal parts around a distinguished core.

    ``left`` components are left-orthogonal, ``right`` components are
    right-orthogonal, and ``core_weights`` carries the weight sequence induced
    on the core entries by the mode weights used during canonicalisation (all
    ones when no weights were given).
    """

    left: tuple
    core: np.ndarray
    right: tuple
    core_position: int
    core_weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(np.asarray(c, float) for c in self.left))
        object.__setattr__(self, "right", tuple(np.asarray(c, float) for c in self.right))
        core = np.asarray(self.core, dtype=float)
        weights = np.asarray(self.core_weights, dtype=float)
        if core.shape != weights.shape:
            raise ValueError("core and core_weights must have equal shape")
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "core_weights", weights)

    def to_tt(self) -> TensorTrain:
        return TensorTrain(self.left + (self.core,) + self.right)

    @property
    def rank(self) -> tuple:
        return self.to_tt().rank


def _mode_weights_or_ones(tt: TensorTrain, mode_weights):
    if mode_weights is None:
        return [np.ones(d) for d in tt.shape]
    weights = [np.asarray(w, dtype=float).reshape(-1) for w in mode_weights]
    if len(weights) != tt.order:
        raise ValueError("one weight vector per mode required")
    for w, d in zip(weights, tt.shape):
        if w.shape[0] != d:
            raise ValueError("weight vector length must match the mode dimension")
        if np.any(w <= 0):
            raise ValueError("mode weights must be strictly positive")
    return weights


def _unit_component(d: int) -> np.ndarray:
    comp = np.zeros((1, d, 1))
    comp[0, 0, 0] = 1.0
    return comp


def _zero_form(tt: TensorTrain, k: int, weights) -> CanonicalForm:
    left = tuple(_unit_component(d) for d in tt.shape[:k])
    right = tuple(_unit_component(d) for d in tt.shape[k + 1 :])
    d_k = tt.shape[k]
    beta = np.outer(np.ones(1), weights[k]).reshape(1, d_k, 1)
    return CanonicalForm(
        left=left,
        core=np.zeros((1, d_k, 1)),
        right=right,
        core_position=k,
        core_weights=beta,
    )


def _canonicalise(tt: TensorTrain, k: int, weights, qc_step) -> CanonicalForm:
    """Shared sweep logic; ``qc_step`` performs one decomposition and returns
    ``(q, c, carried_weights)`` for a matrix whose rows carry given weights."""
    m = tt.order
    if not 0 <= k < m:
        raise ValueError(f"core position must be in [0, {m - 1}]")

    left = []
    carry_l = np.ones((1, 1))
    wl = np.ones(1)
    for j in range(k):
        x3 = np.tensordot(carry_l, tt.components[j], axes=1)
        rl, d, rr = x3.shape
        mat = x3.reshape(rl * d, rr)
        if not np.any(clean_array(mat)):
            return _zero_form(tt, k, weights)
        row_w = np.kron(wl, weights[j])
        q, c, wl = qc_step(mat, row_w)
        left.append(q.reshape(rl, d, -1))
        carry_l = c

    right = []
    carry_r = np.ones((1, 1))
    wr = np.ones(1)
    for j in range(m - 1, k, -1):
        x3 = np.tensordot(tt.components[j], carry_r, axes=1)
        rl, d, rr = x3.shape
        mat = x3.reshape(rl, d * rr)
        if not np.any(clean_array(mat)):
            return _zero_form(tt, k, weights)
        row_w = np.kron(weights[j], wr)
        q, c, wr = qc_step(mat.T, row_w)
        right.insert(0, q.T.reshape(-1, d, rr))
        carry_r = c.T

    core = np.tensordot(np.tensordot(carry_l, tt.components[k], axes=1), carry_r, axes=1)
    core = clean_array(core)
    if not np.any(core):
        return _zero_form(tt, k, weights)
    beta = wl[:, None, None] * weights[k][None, :, None] * wr[None, None, :]
    return CanonicalForm(
        left=tuple(left),
        core=core,
        right=tuple(right),
        core_position=k,
        core_weights=beta,
    )


def canonicalise_sparse(tt: TensorTrain, k: int, mode_weights=None) -> CanonicalForm:
    """Sparse canonicalisation with core position ``k``.

    Sweeps sparse QC decompositions from both ends towards ``k``.  The
    non-core components come out 0/1-valued, orthogonal, and as sparse as
    their bond dimension; the core keeps exactly the nonzero entries of the
    represented tensor.  With product mode weights the induced core weights
    are the corresponding subsequence of the product weight tensor, so all
    weighted norms of the full tensor can be read off the core.
    """
    weights = _mode_weights_or_ones(tt, mode_weights)

    def step(mat, row_w):
        pair = sparse_qc(mat)
        return pair.q, pair.c, pair.q.T @ row_w

    return _canonicalise(tt, k, weights, step)


def canonicalise_omega(tt: TensorTrain, k: int, mode_weights) -> CanonicalForm:
    """Weight-orthogonal canonicalisation with core position ``k``.

    Like :func:`canonicalise_sparse` with every sparse QC replaced by an
    omega QC against the squared product weights, so each non-core component
    is orthogonal and weight-orthogonal.  The returned core weights satisfy
    ``beta^2 = diag(Q^T diag(w^2) Q)`` for the induced global operator ``Q``
    and ``w`` the product of the given mode weights; in particular
    ``||A||_{l2_w} == ||C||_{l2_beta}``.
    """
    weights = _mode_weights_or_ones(tt, mode_weights)

    def step(mat, row_w):
        pair, lam = omega_qc(mat, row_w**2)
        return pair.q, pair.c, np.sqrt(lam)

    return _canonicalise(tt, k, weights, step)


def core_basis_matrix(cf: CanonicalForm, guard: int = 1_000_000) -> np.ndarray:
    """Dense matrix of the operator mapping core entries to the full tensor.

    Columns are indexed by flattened core positions ``(a, i, b)`` in row-major
    order; ``vec(A) = Q @ vec(core)``.  Intended as a test oracle for small
    shapes only.
    """
    shape = cf.to_tt().shape
    rl, d, rr = cf.core.shape
    size = int(np.prod(shape, dtype=object)) * rl * d * rr
    if size > guard:
        raise ValueError("core basis matrix exceeds the dense guard rail")

    left = np.ones((1, 1))
    for comp in cf.left:
        left = np.tensordot(left, comp, axes=1).reshape(-1, comp.shape[2])
    right = np.ones((1, 1))
    for comp in reversed(cf.right):
        right = np.tensordot(comp, right, axes=1).reshape(comp.shape[0], -1)
    return np.kron(left, np.kron(np.eye(d), right.T))


def canonical_form_to_json(cf: CanonicalForm) -> dict:
    doc = tensor_train_to_json(cf.to_tt())
    doc["type"] = "canonical_form"
    doc["core_position"] = cf.core_position
    doc["core_weights"] = _encode_floats(cf.core_weights)
    return doc


def canonical_form_from_json(doc) -> CanonicalForm:
    if isinstance(doc, str):
        doc = json.loads(doc)
    if doc.get("type") != "canonical_form":
        raise ValueError("not a canonical_form document")
    k = int(doc["core_position"])
    tt_doc = dict(doc)
    tt_doc["type"] = "tensor_train"
    tt = tensor_train_from_json(tt_doc)
    core = tt.components[k]
    return CanonicalForm(
        left=tt.components[:k],
        core=core,
        right=tt.components[k + 1 :],
        core_position=k,
        core_weights=_decode_floats(doc["core_weights"]).reshape(core.shape),
    )
