"""Sparse COO tensors, tensor trains, and their structural operations.

Layout convention: multi-index ``(i_0, ..., i_{M-1})`` maps to the flat
position ``sum_k i_k * prod_{l>k} d_l`` (row-major), and all reshapes below
rely on it.  Indices are 0-based throughout, including core positions.
"""

import base64
import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DENSE_GUARD",
    "SparseTensor",
    "SparseMatrixCOO",
    "TensorTrain",
    "vectorise",
    "devectorise",
    "unfold",
    "contract",
    "tt_zero",
    "tt_from_sparse",
    "tt_add",
    "tt_reconstruct",
    "tt_orthogonality_check",
    "sparse_tensor_to_json",
    "sparse_tensor_from_json",
    "tensor_train_to_json",
    "tensor_train_from_json",
]

# Dense materialisation is a test oracle, not a production path.
DENSE_GUARD = 1_000_000


def _check_dense_size(shape):
    size = int(np.prod([int(d) for d in shape], dtype=object))
    if size > DENSE_GUARD:
        raise ValueError(
            f"dense materialisation of {tuple(shape)} has {size} entries, "
            f"exceeding the guard rail of {DENSE_GUARD}"
        )
    return size


def _encode_floats(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _decode_floats(payload: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(payload.encode("ascii")), dtype="<f8").copy()


@dataclass(frozen=True)
class SparseTensor:
    """Order-M tensor stored as unique (multi-index, value) pairs, values != 0."""

    shape: tuple
    indices: np.ndarray  # (nnz, M) integer multi-indices
    values: np.ndarray  # (nnz,)

    def __post_init__(self):
        shape = tuple(int(d) for d in self.shape)
        if any(d < 1 for d in shape):
            raise ValueError(f"invalid shape {shape}")
        indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, len(shape))
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if indices.shape[0] != values.shape[0]:
            raise ValueError("indices and values must pair up")
        if indices.size and (np.any(indices < 0) or np.any(indices >= np.array(shape))):
            raise ValueError("index out of range")
        if np.unique(indices, axis=0).shape[0] != indices.shape[0]:
            raise ValueError("duplicate multi-indices")
        if np.any(values == 0) or not np.all(np.isfinite(values)):
            raise ValueError("values must be nonzero and finite")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    @property
    def order(self) -> int:
        return len(self.shape)

    @property
    def nnz(self) -> int:
        return self.values.size

    def to_dense(self) -> np.ndarray:
        _check_dense_size(self.shape)
        dense = np.zeros(self.shape)
        if self.nnz:
            dense[tuple(self.indices.T)] = self.values
        return dense

    @classmethod
    def from_dense(cls, arr, tol: float = 0.0) -> "SparseTensor":
        arr = np.asarray(arr, dtype=float)
        mask = np.abs(arr) > tol
        indices = np.argwhere(mask)
        return cls(shape=arr.shape, indices=indices, values=arr[mask])


@dataclass(frozen=True)
class SparseMatrixCOO:
    """Matrix in coordinate format with unique (row, col) pairs."""

    rows: np.ndarray
    cols: np.ndarray
    data: np.ndarray
    shape: tuple

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        data = np.asarray(self.data, dtype=float).reshape(-1)
        n, m = (int(s) for s in self.shape)
        if not rows.shape == cols.shape == data.shape:
            raise ValueError("rows, cols and data must have equal length")
        if rows.size and (
            rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= m
        ):
            raise ValueError("index out of range")
        pairs = np.stack([rows, cols], axis=1)
        if np.unique(pairs, axis=0).shape[0] != rows.size:
            raise ValueError("duplicate (row, col) pairs")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "shape", (n, m))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        dense[self.rows, self.cols] = self.data
        return dense

    @classmethod
    def from_dense(cls, arr, tol: float = 0.0) -> "SparseMatrixCOO":
        arr = np.asarray(arr, dtype=float)
        rows, cols = np.nonzero(np.abs(arr) > tol)
        return cls(rows=rows, cols=cols, data=arr[rows, cols], shape=arr.shape)


@dataclass(frozen=True)
class TensorTrain:
    """Chain of order-3 components ``(r_{k-1}, d_k, r_k)`` with r_0 = r_M = 1."""

    components: tuple

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=float) for c in self.components)
        if not comps:
            raise ValueError("a tensor train needs at least one component")
        for c in comps:
            if c.ndim != 3:
                raise ValueError(f"components must be order 3, got shape {c.shape}")
        if comps[0].shape[0] != 1 or comps[-1].shape[2] != 1:
            raise ValueError("boundary ranks must equal 1")
        for left, right in zip(comps, comps[1:]):
            if left.shape[2] != right.shape[0]:
                raise ValueError(
                    f"adjacent ranks disagree: {left.shape} vs {right.shape}"
                )
        object.__setattr__(self, "components", comps)

    @property
    def order(self) -> int:
        return len(self.components)

    @property
    def shape(self) -> tuple:
        return tuple(c.shape[1] for c in self.components)

    @property
    def rank(self) -> tuple:
        return tuple(c.shape[2] for c in self.components[:-1])


def vectorise(a) -> np.ndarray:
    """Row-major flattening; for sparse input the dense guard applies."""
    if isinstance(a, SparseTensor):
        a = a.to_dense()
    return np.asarray(a, dtype=float).reshape(-1).copy()


def devectorise(vec, shape) -> np.ndarray:
    """Inverse of :func:`vectorise` for a given shape."""
    vec = np.asarray(vec, dtype=float)
    return vec.reshape(tuple(int(d) for d in shape)).copy()


def unfold(a, k: int) -> np.ndarray:
    """Matricisation grouping the first ``k`` modes as rows, ``1 <= k <= M-1``."""
    if isinstance(a, SparseTensor):
        a = a.to_dense()
    a = np.asarray(a, dtype=float)
    if not 1 <= k <= a.ndim - 1:
        raise ValueError(f"k must be in [1, {a.ndim - 1}], got {k}")
    rows = int(np.prod(a.shape[:k]))
    return a.reshape(rows, -1)


def contract(a, b) -> np.ndarray:
    """Sum-product over the last mode of ``a`` and the first mode of ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"contraction mismatch: {a.shape} with {b.shape}")
    return np.tensordot(a, b, axes=1)


def tt_zero(shape) -> TensorTrain:
    """The zero tensor as a rank-1 train of all-zero components."""
    return TensorTrain(tuple(np.zeros((1, int(d), 1)) for d in shape))


def tt_from_sparse(a: SparseTensor, core_position: int) -> TensorTrain:
    """Rank-nnz tensor train of a sparse tensor, values folded into one core.

    Every component except the core is a stack of standard basis vectors
    selecting the support, one slot per nonzero; the core carries the values
    on the same selection pattern.  All bond dimensions equal ``nnz``.
    """
    m = a.order
    if not 0 <= core_position < m:
        raise ValueError(f"core position must be in [0, {m - 1}]")
    big_r = a.nnz
    if big_r == 0:
        return tt_zero(a.shape)

    comps = []
    for j, d in enumerate(a.shape):
        rl = 1 if j == 0 else big_r
        rr = 1 if j == m - 1 else big_r
        comp = np.zeros((rl, d, rr))
        slots = a.indices[:, j]
        left = np.zeros(big_r, dtype=np.int64) if j == 0 else np.arange(big_r)
        right = np.zeros(big_r, dtype=np.int64) if j == m - 1 else np.arange(big_r)
        if j == core_position:
            comp[left, slots, right] = a.values
        else:
            comp[left, slots, right] = 1.0
        comps.append(comp)
    return TensorTrain(tuple(comps))


def tt_add(a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Block-diagonal sum; bond ranks add, reconstruction is the sum."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    m = a.order
    if m == 1:
        return TensorTrain((a.components[0] + b.components[0],))
    comps = []
    for j in range(m):
        ca, cb = a.components[j], b.components[j]
        d = ca.shape[1]
        rl = 1 if j == 0 else ca.shape[0] + cb.shape[0]
        rr = 1 if j == m - 1 else ca.shape[2] + cb.shape[2]
        comp = np.zeros((rl, d, rr))
        if j == 0:
            comp[:, :, : ca.shape[2]] = ca
            comp[:, :, ca.shape[2] :] = cb
        elif j == m - 1:
            comp[: ca.shape[0]] = ca
            comp[ca.shape[0] :] = cb
        else:
            comp[: ca.shape[0], :, : ca.shape[2]] = ca
            comp[ca.shape[0] :, :, ca.shape[2] :] = cb
        comps.append(comp)
    return TensorTrain(tuple(comps))


def tt_reconstruct(tt: TensorTrain) -> np.ndarray:
    """Dense tensor represented by the train (guarded test oracle)."""
    _check_dense_size(tt.shape)
    result = tt.components[0][0]  # (d_0, r_1)
    for comp in tt.components[1:]:
        result = np.tensordot(result, comp, axes=1)
    return result[..., 0]


def tt_orthogonality_check(component, side: str, tol: float = 1e-10):
    """Frobenius residual of ``G^T G - I`` (left) or ``G G^T - I`` (right)."""
    comp = np.asarray(component, dtype=float)
    if comp.ndim != 3:
        raise ValueError("component must be order 3")
    rl, d, rr = comp.shape
    if side == "left":
        g = comp.reshape(rl * d, rr)
        residual = float(np.linalg.norm(g.T @ g - np.eye(rr)))
    elif side == "right":
        g = comp.reshape(rl, d * rr)
        residual = float(np.linalg.norm(g @ g.T - np.eye(rl)))
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return residual <= tol, residual


# ---------------------------------------------------------------------------
# JSON interchange.  Floats travel as base64 little-endian IEEE 754 doubles;
# shapes, ranks and indices as plain JSON integers.
# ---------------------------------------------------------------------------


def sparse_tensor_to_json(a: SparseTensor) -> dict:
    return {
        "type": "sparse_tensor",
        "shape": list(a.shape),
        "indices": a.indices.tolist(),
        "values": _encode_floats(a.values),
    }


def sparse_tensor_from_json(doc) -> SparseTensor:
    if isinstance(doc, str):
        doc = json.loads(doc)
    if doc.get("type") != "sparse_tensor":
        raise ValueError("not a sparse_tensor document")
    return SparseTensor(
        shape=tuple(doc["shape"]),
        indices=np.asarray(doc["indices"], dtype=np.int64).reshape(-1, len(doc["shape"])),
        values=_decode_floats(doc["values"]),
    )


def tensor_train_to_json(tt: TensorTrain) -> dict:
    return {
        "type": "tensor_train",
        "shape": list(tt.shape),
        "rank": list(tt.rank),
        "components": [_encode_floats(c) for c in tt.components],
    }


def tensor_train_from_json(doc) -> TensorTrain:
    if isinstance(doc, str):
        doc = json.loads(doc)
    if doc.get("type") != "tensor_train":
        raise ValueError("not a tensor_train document")
    shape = [int(d) for d in doc["shape"]]
    rank = [int(r) for r in doc["rank"]]
    bonds = [1] + rank + [1]
    comps = []
    for j, payload in enumerate(doc["components"]):
        comps.append(_decode_floats(payload).reshape(bonds[j], shape[j], bonds[j + 1]))
    return TensorTrain(tuple(comps))
