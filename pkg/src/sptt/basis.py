"""Univariate orthonormal bases, product weight models, and samplers.

Two polynomial families are provided:

- Legendre, orthonormal for the uniform probability measure ``dy/2`` on
  ``[-1, 1]`` (so the j-th function attains ``sqrt(2j+1)`` at ``y = 1``), and
- probabilist Hermite, orthonormal under the standard Gaussian.

For Hermite regression the sample points are drawn from a widened Gaussian
``N(0, v)`` with ``v > 1`` and the weight function ``w = dN(0,1)/dN(0,v)``
normalised so that ``w^{-1}`` integrates to one against the Gaussian; the
basis sup-norm weights are then finite:
``w(y) = sqrt(v) * exp(-y^2 (v-1) / (2v))``.

The hierarchical hat functions of :func:`hat_basis_eval` are L2-normalised
piecewise-linear bumps with disjoint supports within each level.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BasisFamily",
    "WeightModel",
    "legendre",
    "hermite",
    "evaluate",
    "legendre_weights",
    "hermite_weights",
    "weight_model_for",
    "product_weight",
    "dense_product_weights",
    "sqrt_weight_values",
    "sample_parameters",
    "hat_basis_eval",
    "dump_weight_fixture",
    "load_weight_fixture",
]

HERMITE_GRID_POINTS = 100_001  # documented grid for sup-norm weights
HERMITE_GRID_HALFWIDTH = 10.0  # in units of the sampling standard deviation


@dataclass(frozen=True)
class BasisFamily:
    """A univariate orthonormal family truncated to ``size`` functions.

    ``variance_scale`` is the variance of the sampling Gaussian for the
    Hermite family (must exceed 1); it is fixed to 1 for Legendre, whose
    sampling measure is the orthogonality measure itself (``w === 1``).
    """

    kind: str
    size: int
    variance_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("legendre", "hermite"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("size must be at least 1")
        if self.kind == "hermite" and self.variance_scale <= 1.0:
            raise ValueError("hermite sampling needs variance_scale > 1")
        if self.kind == "legendre" and self.variance_scale != 1.0:
            raise ValueError("legendre uses variance_scale = 1")

    @property
    def measure(self) -> str:
        if self.kind == "legendre":
            return "uniform probability measure on [-1, 1]"
        return "standard Gaussian on R"


def legendre(size: int) -> BasisFamily:
    return BasisFamily(kind="legendre", size=size)


def hermite(size: int, variance_scale: float = 2.0) -> BasisFamily:
    return BasisFamily(kind="hermite", size=size, variance_scale=variance_scale)


def _legendre_values(y: np.ndarray, size: int) -> np.ndarray:
    out = np.empty((y.size, size))
    out[:, 0] = 1.0
    if size > 1:
        out[:, 1] = y
    for j in range(1, size - 1):
        out[:, j + 1] = ((2 * j + 1) * y * out[:, j] - j * out[:, j - 1]) / (j + 1)
    return out * np.sqrt(2.0 * np.arange(size) + 1.0)


def _hermite_values(y: np.ndarray, size: int) -> np.ndarray:
    out = np.empty((y.size, size))
    out[:, 0] = 1.0
    if size > 1:
        out[:, 1] = y
    for j in range(1, size - 1):
        out[:, j + 1] = (y * out[:, j] - math.sqrt(j) * out[:, j - 1]) / math.sqrt(j + 1)
    return out


def evaluate(basis: BasisFamily, y) -> np.ndarray:
    """Values of all basis functions at the points ``y``.

    Returns shape ``(len(y), size)`` for array input and ``(size,)`` for a
    scalar, computed by the three-term recurrences in normalised form.
    """
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if y_arr.ndim != 1:
        raise ValueError("y must be scalar or one-dimensional")
    if not np.all(np.isfinite(y_arr)):
        raise ValueError("evaluation points must be finite")
    if basis.kind == "legendre":
        values = _legendre_values(y_arr, basis.size)
    else:
        values = _hermite_values(y_arr, basis.size)
    return values[0] if np.isscalar(y) or np.ndim(y) == 0 else values


def legendre_weights(size: int) -> np.ndarray:
    """Sup-norms ``sqrt(2j+1)`` of the normalised Legendre functions."""
    if size < 1:
        raise ValueError("size must be at least 1")
    return np.sqrt(2.0 * np.arange(size) + 1.0)


def _sqrt_w_1d(y: np.ndarray, v: float) -> np.ndarray:
    return v**0.25 * np.exp(-(y**2) * (v - 1.0) / (4.0 * v))


@functools.lru_cache(maxsize=None)
def _hermite_weights_cached(size: int, v: float) -> tuple:
    half = HERMITE_GRID_HALFWIDTH * math.sqrt(v)
    grid = np.linspace(-half, half, HERMITE_GRID_POINTS)
    values = np.abs(_sqrt_w_1d(grid, v)[:, None] * _hermite_values(grid, size))
    return tuple(values.max(axis=0))


def hermite_weights(size: int, variance_scale: float) -> np.ndarray:
    """Sup-norms of ``sqrt(w) H_j`` over a fixed fine grid.

    The Gaussian ratio ``sqrt(w)`` decays like ``exp(-y^2 (v-1)/(4v))`` and
    dominates the polynomial growth, so the sup is finite for ``v > 1`` and
    attained well inside the grid ``[-10 sqrt(v), 10 sqrt(v)]``.
    """
    if size < 1:
        raise ValueError("size must be at least 1")
    if variance_scale <= 1.0:
        raise ValueError("sup norm is infinite for variance_scale <= 1")
    return np.array(_hermite_weights_cached(size, float(variance_scale)))


@dataclass(frozen=True)
class WeightModel:
    """Per-mode basis weight vectors; the global weight is their product."""

    mode_weights: tuple

    def __post_init__(self):
        weights = tuple(np.asarray(w, dtype=float).reshape(-1) for w in self.mode_weights)
        for w in weights:
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise ValueError("mode weights must be positive and finite")
        object.__setattr__(self, "mode_weights", weights)

    @property
    def n_modes(self) -> int:
        return len(self.mode_weights)

    @property
    def shape(self) -> tuple:
        return tuple(w.size for w in self.mode_weights)


def weight_model_for(basis: BasisFamily, n_modes: int) -> WeightModel:
    """Isotropic weight model ``omega_j = ||sqrt(w) B_j||_inf`` per mode."""
    if basis.kind == "legendre":
        w = legendre_weights(basis.size)
    else:
        w = hermite_weights(basis.size, basis.variance_scale)
    return WeightModel(mode_weights=(w,) * n_modes)


def product_weight(model: WeightModel, multi_index) -> float:
    """Product of per-mode weights at one multi-index."""
    idx = np.asarray(multi_index, dtype=np.int64).reshape(-1)
    if idx.size != model.n_modes:
        raise ValueError("multi-index length must match the number of modes")
    return float(np.prod([model.mode_weights[m][idx[m]] for m in range(idx.size)]))


def dense_product_weights(model: WeightModel, guard: int = 1_000_000) -> np.ndarray:
    """Full product weight tensor (guarded test oracle)."""
    size = int(np.prod(model.shape, dtype=object))
    if size > guard:
        raise ValueError("dense weight tensor exceeds the guard rail")
    dense = np.ones(1)
    for w in model.mode_weights:
        dense = np.kron(dense, w)
    return dense.reshape(model.shape)


def sqrt_weight_values(basis: BasisFamily, points: np.ndarray) -> np.ndarray:
    """``sqrt(w(y_i))`` for sample points of shape ``(n, M)``."""
    points = np.asarray(points, dtype=float)
    if basis.kind == "legendre":
        return np.ones(points.shape[0])
    return np.prod(_sqrt_w_1d(points, basis.variance_scale), axis=1)


def sample_parameters(basis: BasisFamily, n_modes: int, n: int, seed):
    """Draw ``n`` i.i.d. parameter points from ``w^{-1} gamma``.

    Returns ``(points, weights)`` with points of shape ``(n, n_modes)`` and
    the weight-function values ``w(y_i)``.  Legendre points are uniform on
    ``[-1, 1]^M`` with ``w === 1``; Hermite points are centred Gaussian with
    variance ``variance_scale``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if basis.kind == "legendre":
        points = rng.uniform(-1.0, 1.0, size=(n, n_modes))
        weights = np.ones(n)
    else:
        points = rng.normal(0.0, math.sqrt(basis.variance_scale), size=(n, n_modes))
        weights = sqrt_weight_values(basis, points) ** 2
    return points, weights


def hat_basis_eval(level: int, j: int, x) -> np.ndarray:
    """L2-normalised hierarchical hat function ``phi_{level,j}`` on [0, 1].

    The unnormalised bump is ``max(1 - |2^level x - j|, 0)`` for odd
    ``0 < j < 2^level``; the normalisation constant is
    ``sqrt(3 * 2^level / 2)``.  Hats of one level have disjoint supports.
    """
    if level < 1:
        raise ValueError("level must be at least 1")
    if not 0 < j < 2**level or j % 2 == 0:
        raise ValueError(f"j must be odd with 0 < j < 2^level, got {j}")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x_arr < 0) or np.any(x_arr > 1):
        raise ValueError("x must lie in [0, 1]")
    bump = np.maximum(1.0 - np.abs(2.0**level * x_arr - j), 0.0)
    values = math.sqrt(3.0 * 2.0**level / 2.0) * bump
    return values[0] if np.ndim(x) == 0 else values


def dump_weight_fixture(path, weights: np.ndarray) -> None:
    """Write a ``j,omega`` CSV with 17 significant digits (exact round trip)."""
    with open(path, "w") as fh:
        fh.write("j,omega\n")
        for j, w in enumerate(np.asarray(weights, dtype=float)):
            fh.write(f"{j},{w:.17g}\n")


def load_weight_fixture(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "j,omega":
            raise ValueError(f"unexpected fixture header {header!r}")
        return np.array([float(line.split(",")[1]) for line in fh if line.strip()])
