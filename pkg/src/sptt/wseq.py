"""Weighted sequence spaces: norms, best n-term truncation, Stechkin-type bounds.

All sequences are finite real vectors of some length N.  Statements about
infinite sequences are exercised on truncations whose tails are controlled by
the weights.  Exponents ``p``/``q`` may be ``math.inf``; the sup-norm branch is
taken explicitly rather than by a limit.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WeightedSequence",
    "StechkinParams",
    "TruncationResult",
    "lp_norm",
    "weighted_norm",
    "weighted_l0",
    "best_n_term",
    "classical_stechkin_bound",
    "weighted_r_sparse_bound",
    "embed_norm_bound",
    "monotone_majorant",
    "harmonic_partial_bounds",
    "harmonic_tail_bounds",
    "best_n_term_rate_hd",
]

_CONSTRAINT_RTOL = 1e-12


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class WeightedSequence:
    """A finite real sequence paired with a nonnegative weight sequence."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = _as_vector(self.values, "values")
        weights = _as_vector(self.weights, "weights")
        if values.shape != weights.shape:
            raise ValueError("values and weights must have equal length")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class StechkinParams:
    """Exponents and weight sequences for the weighted truncation bound.

    The three sequences are coupled by ``alpha**p == sigma**(p-q) * omega**q``
    entrywise (``alpha == sigma`` when ``p`` is infinite).  ``alpha`` sets the
    norm in which the truncation error is measured, ``sigma`` orders the
    truncation, and ``omega`` measures the decay of the sequence.
    """

    p: float
    q: float
    alpha: np.ndarray
    sigma: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        if not 0 < self.q < self.p:
            raise ValueError(f"need 0 < q < p, got q={self.q}, p={self.p}")
        alpha = _as_vector(self.alpha, "alpha")
        sigma = _as_vector(self.sigma, "sigma")
        omega = _as_vector(self.omega, "omega")
        if not alpha.shape == sigma.shape == omega.shape:
            raise ValueError("alpha, sigma, omega must have equal length")
        if np.any(alpha < 0) or np.any(sigma < 0) or np.any(omega < 0):
            raise ValueError("alpha, sigma, omega must be nonnegative")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "omega", omega)
        self._check_constraint()

    def _check_constraint(self):
        p, q = self.p, self.q
        if math.isinf(p):
            # alpha == sigma, compared entrywise with relative tolerance
            scale = np.maximum(np.abs(self.sigma), 1e-300)
            if np.any(np.abs(self.alpha - self.sigma) > _CONSTRAINT_RTOL * scale):
                raise ValueError("p = inf requires alpha == sigma")
            return
        pos = (self.sigma > 0) & (self.omega > 0)
        # where sigma or omega vanishes the product is zero, so alpha must be too
        if np.any(self.alpha[~pos] > 0):
            raise ValueError("alpha must vanish where sigma * omega vanishes")
        if np.any(pos):
            # log-space comparison avoids overflow of alpha**p for large p
            lhs = p * np.log(self.alpha[pos])
            rhs = (p - q) * np.log(self.sigma[pos]) + q * np.log(self.omega[pos])
            tol = _CONSTRAINT_RTOL * np.maximum(1.0, np.abs(rhs))
            if np.any(np.abs(lhs - rhs) > tol):
                raise ValueError("constraint alpha^p = sigma^(p-q) omega^q violated")

    @classmethod
    def from_sigma_omega(cls, p, q, sigma, omega) -> "StechkinParams":
        """Build consistent parameters with ``alpha`` derived from the constraint."""
        sigma = _as_vector(sigma, "sigma")
        omega = _as_vector(omega, "omega")
        if math.isinf(p):
            alpha = sigma.copy()
        else:
            alpha = np.zeros_like(sigma)
            pos = (sigma > 0) & (omega > 0)
            alpha[pos] = np.exp(
                ((p - q) * np.log(sigma[pos]) + q * np.log(omega[pos])) / p
            )
        return cls(p=p, q=q, alpha=alpha, sigma=sigma, omega=omega)


@dataclass(frozen=True)
class TruncationResult:
    """Index set kept by a best n-term truncation, its tail norm and bound."""

    kept_indices: np.ndarray
    tail_norm: float
    bound: float


def lp_norm(x, p: float) -> float:
    """``(sum |x_j|^p)^(1/p)`` for finite p > 0, ``max |x_j|`` for p = inf.

    Scaled by the largest entry to avoid spurious overflow for small p or
    large entries.
    """
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    m = float(np.max(np.abs(x)))
    if m == 0.0 or math.isinf(p):
        return m
    return m * float(np.sum((np.abs(x) / m) ** p)) ** (1.0 / p)


def weighted_norm(seq: WeightedSequence, p: float) -> float:
    """The weighted norm ``|| omega * v ||_{l^p}``."""
    result = lp_norm(seq.weights * seq.values, p)
    if not math.isfinite(result):
        raise OverflowError("weighted norm is not finite")
    return result


def weighted_l0(seq: WeightedSequence, threshold: float = 0.0) -> float:
    """Sum of squared weights over the support of ``v``.

    Entries with ``|v_j| <= threshold`` count as zero; the default threshold 0
    keeps exact support semantics, a positive value is useful after LASSO.
    """
    support = np.abs(seq.values) > threshold
    return float(np.sum(seq.weights[support] ** 2))


def _one_over(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


def best_n_term(params: StechkinParams, v, n: int) -> TruncationResult:
    """Truncate ``v`` to the n largest entries of ``sigma * |v|``.

    Returns the kept index set (ties broken towards the smaller index), the
    exact tail norm in ``l^p_alpha``, and the a priori bound
    ``||P_{J_{n+1}} omega/sigma||_q^{-s q} * ||v||_{l^q_omega}`` with
    ``s = 1/q - 1/p``, which always dominates the tail norm.
    """
    v = _as_vector(v, "v")
    if v.shape != params.sigma.shape:
        raise ValueError("v must have the same length as the parameter sequences")
    if not 0 <= n <= v.size:
        raise ValueError(f"need 0 <= n <= {v.size}, got n={n}")
    if np.any((params.sigma == 0) & (v != 0)):
        raise ValueError("sigma vanishes on the support of v")

    candidates = np.flatnonzero(params.sigma > 0)
    keys = params.sigma[candidates] * np.abs(v[candidates])
    order = candidates[np.argsort(-keys, kind="stable")]

    kept = np.sort(order[: min(n, order.size)])
    mask = np.ones(v.size, dtype=bool)
    mask[kept] = False
    tail_norm = lp_norm(params.alpha[mask] * v[mask], params.p)

    next_set = order[: min(n + 1, order.size)]
    s = 1.0 / params.q - _one_over(params.p)
    ratio_norm = lp_norm(params.omega[next_set] / params.sigma[next_set], params.q)
    vq = lp_norm(params.omega * v, params.q)
    if ratio_norm == 0.0:
        bound = math.inf if vq > 0 else 0.0
    else:
        bound = ratio_norm ** (-s * params.q) * vq
    return TruncationResult(kept_indices=kept, tail_norm=tail_norm, bound=bound)


def classical_stechkin_bound(v, p: float, q: float, n: int) -> float:
    """Unweighted truncation bound ``(n+1)^{-s} ||v||_{l^q}``, ``s = 1/q - 1/p``."""
    if not 0 < q < p:
        raise ValueError(f"need 0 < q < p, got q={q}, p={p}")
    if n < 0:
        raise ValueError("n must be nonnegative")
    s = 1.0 / q - _one_over(p)
    return (n + 1) ** (-s) * lp_norm(v, q)


def weighted_r_sparse_bound(v, tilde_omega, p: float, q: float, r: float):
    """Best weighted-cardinality-r truncation and its error bound.

    Derives ``alpha = tw^{(2-p)/p}``, ``sigma = tw^{-1}``,
    ``omega = tw^{(2-q)/q}`` from the single sequence ``tw``, keeps the largest
    entries of ``sigma |v|`` while the weighted cardinality
    ``sum_{j in J} tw_j^2`` stays within ``r``, and returns the kept index set
    together with the bound ``r^{-s} ||v||_{l^q_omega}``.  ``r = 0`` keeps
    nothing and reports an unbounded (infinite) bound.
    """
    v = _as_vector(v, "v")
    tw = _as_vector(tilde_omega, "tilde_omega")
    if v.shape != tw.shape:
        raise ValueError("v and tilde_omega must have equal length")
    if np.any(tw <= 0):
        raise ValueError("tilde_omega must be strictly positive")
    if not 0 < q < p <= 2:
        raise ValueError(f"need 0 < q < p <= 2, got q={q}, p={p}")
    if r < 0:
        raise ValueError("r must be nonnegative")

    sigma = 1.0 / tw
    omega = tw ** ((2.0 - q) / q)
    order = np.argsort(-(sigma * np.abs(v)), kind="stable")
    budget = np.cumsum(tw[order] ** 2)
    n_r = int(np.searchsorted(budget, r * (1 + 1e-15), side="right"))
    kept = np.sort(order[:n_r])

    s = 1.0 / q - 1.0 / p
    vq = lp_norm(omega * v, q)
    bound = math.inf if r == 0 else r ** (-s) * vq
    return kept, bound


def embed_norm_bound(omega, tilde_omega, p: float, q: float) -> float:
    """Embedding constant ``||omega/tilde_omega||_{l^{1/s}}`` with ``s = 1/q - 1/p``.

    Guarantees ``||v||_{l^q_omega} <= bound * ||v||_{l^p_tilde_omega}`` for
    every sequence ``v``.  Indices where ``tilde_omega`` vanishes but ``omega``
    does not make the bound infinite (returned as ``math.inf``).  Requires
    ``0 < q <= p``; the degenerate exponent ``q = 0`` is rejected because the
    weighted counting norm is scale invariant and admits no such constant.
    """
    omega = _as_vector(omega, "omega")
    tw = _as_vector(tilde_omega, "tilde_omega")
    if omega.shape != tw.shape:
        raise ValueError("omega and tilde_omega must have equal length")
    if not 0 < q <= p:
        raise ValueError(f"need 0 < q <= p, got q={q}, p={p}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(omega == 0, 0.0, omega / tw)
    if np.any(np.isinf(ratio)):
        return math.inf
    s = 1.0 / q - _one_over(p)
    if s == 0.0:
        return float(np.max(ratio)) if ratio.size else 0.0
    return lp_norm(ratio, 1.0 / s)


def monotone_majorant(v) -> np.ndarray:
    """Minimal nonincreasing majorant ``v^mon_j = max_{k >= j} |v_k|``."""
    v = _as_vector(v, "v")
    if v.size == 0:
        return v
    return np.maximum.accumulate(np.abs(v)[::-1])[::-1]


def harmonic_partial_bounds(s: float, n: int):
    """Bracket ``sum_{k=1}^n k^s`` by ``n^{s+1}/(s+1)`` and ``(n+1)^{s+1}/(s+1)``."""
    if s <= 0:
        raise ValueError("s must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    value = float(np.sum(np.arange(1, n + 1, dtype=float) ** s))
    lower = n ** (s + 1.0) / (s + 1.0)
    upper = (n + 1.0) ** (s + 1.0) / (s + 1.0)
    return lower, value, upper


def harmonic_tail_bounds(s: float, k: int):
    """Bracket the tail ``sum_{j>=k} j^{-s}`` for ``s > 1``.

    The value is computed by direct summation of the first terms plus an
    Euler-Maclaurin remainder, accurate well beyond 1e-12 relative.
    """
    if s <= 1:
        raise ValueError("s must exceed 1")
    if k < 1:
        raise ValueError("k must be at least 1")
    cut = max(k, 10_000)
    j = np.arange(k, cut, dtype=float)
    direct = float(np.sum(j ** (-s))) if j.size else 0.0
    c = float(cut)
    remainder = (
        c ** (1.0 - s) / (s - 1.0)
        + 0.5 * c ** (-s)
        + s / 12.0 * c ** (-s - 1.0)
        - s * (s + 1.0) * (s + 2.0) / 720.0 * c ** (-s - 3.0)
    )
    value = direct + remainder
    lower = k ** (1.0 - s) / (s - 1.0)
    upper = s / (s - 1.0) * k ** (1.0 - s)
    return lower, value, upper


def best_n_term_rate_hd(kind: str, a: float, n_modes: int, n: int) -> float:
    """Worst-case best n-term rate shape for isotropic product weights.

    For ``kind="exponential"`` (per-mode weights ``exp(a j)``) the shape is
    ``n^{-(M-1)/(2M)} exp(-c_R a n^{1/M})`` with ``c_R = (M!)^{1/M}``; for
    ``kind="algebraic"`` (per-mode weights ``(j+1)^a``) it is
    ``n^{-(a+1/2)} ln(n)^{a(M-1)}``.  Both are rate shapes up to a single
    multiplicative constant that callers fit empirically.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1")
    if kind == "exponential":
        if n < 1:
            raise ValueError("n must be at least 1")
        c_r = math.factorial(n_modes) ** (1.0 / n_modes)
        return n ** (-(n_modes - 1.0) / (2.0 * n_modes)) * math.exp(
            -c_r * a * n ** (1.0 / n_modes)
        )
    if kind == "algebraic":
        if n < 2:
            raise ValueError("algebraic rate needs n >= 2")
        return n ** (-(a + 0.5)) * math.log(n) ** (a * (n_modes - 1.0))
    raise ValueError(f"unknown rate kind {kind!r}")
