"""Restricted-isometry tooling, sample-complexity calculators, and the
power-series to orthogonal-polynomial coefficient transforms with their decay
envelopes.

All logarithms in the complexity formulas are natural; any base ambiguity is
absorbed into the user-supplied leading constant, which is NOT known from
theory and defaults to 1 purely as a placeholder.
"""

import math
import warnings
from dataclasses import dataclass
from math import lgamma

import numpy as np

from .basis import BasisFamily, WeightModel, dense_product_weights, product_weight
from .decomp import canonicalise_omega
from .optim import SampleSet, empirical_norm, mode_value_stacks
from .tensor import TensorTrain, tt_reconstruct

__all__ = [
    "RipEstimate",
    "CoeffTransform",
    "sample_bound",
    "semi_sparse_bound",
    "inverse_weight_l23_sq",
    "random_ball_member",
    "rip_probe",
    "rip_transfer_margin",
    "si_distance_bound",
    "evaluate_coefficients",
    "legendre_transform_matrix",
    "hermite_transform_matrix",
    "power_to_legendre",
    "power_to_hermite",
    "legendre_decay_bound",
    "hermite_decay_bound",
    "write_decay_report",
    "write_rip_report",
]


def sample_bound(r: float, delta: float, dim: float, p_fail: float,
                 c_const: float = 1.0) -> int:
    """Sample count ``ceil(C d^-2 r max(ln^3(r) ln(dim), -ln(p)))``.

    ``dim`` is the dimension of the full candidate space.  For ``r <= 1`` the
    cubed-log term is nonpositive and the failure-probability branch decides.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    if dim < 2:
        raise ValueError("dim must be at least 2")
    if not 0 < p_fail < 1:
        raise ValueError("p_fail must be in (0, 1)")
    if c_const <= 0 or r <= 0:
        raise ValueError("r and the constant must be positive")
    inner = max(math.log(r) ** 3 * math.log(dim), -math.log(p_fail))
    return math.ceil(c_const * delta**-2 * r * inner)


def inverse_weight_l23_sq(omega) -> float:
    """``||omega^{-1}||^2`` in the l^{2/3} quasi-norm.

    ``omega`` is either a flat weight vector or a weight model / sequence of
    per-mode vectors whose implicit product-weight tensor is never
    materialised (the quasi-norm factorises over modes).
    """
    if isinstance(omega, WeightModel):
        omega = omega.mode_weights
    if np.ndim(omega[0]) == 0:
        vec = np.asarray(omega, dtype=float)
        return float(np.sum(vec ** (-2.0 / 3.0)) ** 3)
    total = 1.0
    for mode in omega:
        total *= float(np.sum(np.asarray(mode, dtype=float) ** (-2.0 / 3.0)))
    return total**3


def semi_sparse_bound(r: float, c: float, omega, delta: float, dim: float,
                      p_fail: float, c_const: float = 1.0):
    """Sample count for the sparse/low-rank class via the inflated budget.

    Computes ``r_tilde = (1 + c^2) ||omega^{-1}||_{2/3}^2 r`` and evaluates
    :func:`sample_bound` at ``(r_tilde, delta)``; requires ``c > 15/delta``
    and ``delta < 1/2``.  Returns ``(n, r_tilde)``.  A warning is emitted when
    the inflated budget reaches the ambient dimension, in which case the bound
    asks for an isometry on the whole tensor-product space.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must be in (0, 1/2)")
    if c <= 15.0 / delta:
        raise ValueError(f"need c > 15/delta = {15.0 / delta}")
    r_tilde = (1.0 + c**2) * inverse_weight_l23_sq(omega) * r
    if r_tilde >= dim:
        warnings.warn(
            "inflated sparsity budget reaches the ambient dimension; "
            "the bound degenerates to an isometry on the full space"
        )
    return sample_bound(r_tilde, delta, dim, p_fail, c_const), r_tilde


@dataclass(frozen=True)
class RipEstimate:
    """Worst relative defect ``max |  ||v||_n^2 - ||v||^2 | / ||v||^2`` observed."""

    delta_hat: float
    probe_count: int
    descriptor: str

    def __post_init__(self):
        if self.delta_hat < 0:
            raise ValueError("delta_hat must be nonnegative")


def evaluate_coefficients(coeffs: np.ndarray, basis: BasisFamily, points) -> np.ndarray:
    """Function values of a dense coefficient tensor at sample points."""
    phi = mode_value_stacks(basis, points)
    acc = np.einsum("nd,d...->n...", phi[0], np.asarray(coeffs, dtype=float))
    for mat in phi[1:]:
        acc = np.einsum("nd,nd...->n...", mat, acc)
    return acc


def random_ball_member(weight_model: WeightModel, r: float, rng,
                       max_terms: int = 10_000, sparsity_cap: int = 0) -> np.ndarray:
    """Random unit-norm coefficient tensor with weighted support within ``r``.

    Support indices are proposed uniformly and accepted while the sum of the
    squared product weights stays within the budget; values are Gaussian and
    normalised, so the L2 norm of the represented function is exactly 1.
    ``sparsity_cap`` additionally limits the number of nonzeros when positive.
    """
    shape = weight_model.shape
    coeffs = np.zeros(shape)
    budget = r
    chosen = set()
    for _ in range(max_terms):
        idx = tuple(int(rng.integers(d)) for d in shape)
        if idx in chosen:
            continue
        w2 = product_weight(weight_model, idx) ** 2
        if w2 > budget:
            continue
        chosen.add(idx)
        budget -= w2
        if sparsity_cap and len(chosen) >= sparsity_cap:
            break
        if budget <= 0:
            break
    if not chosen:
        # the constant index is the cheapest element; fall back to it
        cheapest = tuple(int(np.argmin(w)) for w in weight_model.mode_weights)
        chosen.add(cheapest)
    for idx in chosen:
        coeffs[idx] = rng.standard_normal()
    norm = np.linalg.norm(coeffs)
    if norm == 0.0:
        coeffs[next(iter(chosen))] = 1.0
        norm = 1.0
    return coeffs / norm


def rip_probe(samples: SampleSet, basis: BasisFamily, probe, n_probes: int = 100,
              seed: int = 0, weight_model: WeightModel = None, r: float = 0.0,
              sparsity_cap: int = 0) -> RipEstimate:
    """Empirical isometry defect of the sampling operator on a probe set.

    ``probe`` is either an explicit list of coefficient tensors or one of the
    strings "ball" (random members of the weighted-sparse ball of budget
    ``r``) and "model" (ball members with the extra support cap
    ``sparsity_cap``, matching random members of the sparse train class).
    The exact L2 norm of each probe is its coefficient norm.
    """
    rng = np.random.default_rng(seed)
    if isinstance(probe, str):
        if weight_model is None or r <= 0:
            raise ValueError("ball probes need a weight model and budget r > 0")
        cap = sparsity_cap if probe == "model" else 0
        members = [
            random_ball_member(weight_model, r, rng, sparsity_cap=cap)
            for _ in range(n_probes)
        ]
        descriptor = f"{probe}(r={r:g})"
    else:
        members = [np.asarray(c, dtype=float) for c in probe]
        descriptor = f"list({len(members)})"
    if not members:
        raise ValueError("empty probe set")

    worst = 0.0
    for coeffs in members:
        exact_sq = float(np.sum(coeffs**2))
        if exact_sq == 0.0:
            raise ValueError("zero probe element")
        values = evaluate_coefficients(coeffs, basis, samples.points)
        emp_sq = empirical_norm(values, samples.weights) ** 2
        worst = max(worst, abs(emp_sq - exact_sq) / exact_sq)
    return RipEstimate(delta_hat=worst, probe_count=len(members), descriptor=descriptor)


def rip_transfer_margin(delta: float, tau: float) -> float:
    """Isometry-defect inflation when moving to a relative neighbourhood.

    Returns ``eps = 4 tau (1 + (1+delta)/(1-tau)^2)``, which always satisfies
    ``eps >= 8 tau`` and stays below ``15 tau`` for ``delta <= 1/2`` and
    ``tau <= 1/4``.
    """
    if not 0 <= delta < 1 or not 0 <= tau < 1:
        raise ValueError("delta and tau must lie in [0, 1)")
    c = (1.0 + delta) / (1.0 - tau) ** 2
    eps = 4.0 * tau * (1.0 + c)
    assert eps >= 8.0 * tau - 1e-15
    if delta <= 0.5 and tau <= 0.25:
        assert eps <= 15.0 * tau + 1e-15
    return eps


def si_distance_bound(tt: TensorTrain, weight_model: WeightModel, r: float, c: float):
    """Distance of a sparse/low-rank train to the weighted-sparse ball.

    Truncates the represented tensor to the inflated weighted budget
    ``r_tilde = (1+c^2) ||omega^{-1}||_{2/3}^2 r`` (largest ``|A_j|/omega_j``
    first) and returns the scale-invariant distance surrogate
    ``||A - A_tilde||_{l1_omega} / ||A_tilde||_{l2}`` together with every
    intermediate quantity of the chain that certifies it is at most ``1/c``:

    ``l1_omega tail <= r_tilde^{-1/2} ||A||_{l^{2/3}_{omega^2}}
    <= r_tilde^{-1/2} ||omega^{-1}||_{2/3} ||A||_{l2_{omega^3}}``,
    ``||A||_{l2_{omega^3}} = ||C||_{l2_beta} <= sqrt(r) ||A||_{l2}``.

    The membership hypothesis (weighted core support within ``r`` for the
    cubed-weight canonicalisation at every position) is verified and reported.
    """
    if r <= 0 or c <= 0:
        raise ValueError("r and c must be positive")
    dense = tt_reconstruct(tt)
    omega = dense_product_weights(weight_model)
    flat_a = dense.reshape(-1)
    flat_w = omega.reshape(-1)

    cubed = [w**3 for w in weight_model.mode_weights]
    member = True
    core_budget = 0.0
    for k in range(tt.order):
        form = canonicalise_omega(tt, k, cubed)
        support = form.core != 0
        weighted = float(np.sum(form.core_weights[support] ** 2))
        core_budget = max(core_budget, weighted)
        if weighted > r * (1 + 1e-9):
            member = False

    c1 = inverse_weight_l23_sq(weight_model)
    r_tilde = (1.0 + c**2) * c1 * r

    order = np.argsort(-(np.abs(flat_a) / flat_w), kind="stable")
    cumulative = np.cumsum(flat_w[order] ** 2)
    kept = order[: int(np.searchsorted(cumulative, r_tilde * (1 + 1e-15), side="right"))]
    truncated = np.zeros_like(flat_a)
    truncated[kept] = flat_a[kept]
    tail = flat_a - truncated

    tail_l1w = float(np.sum(flat_w * np.abs(tail)))
    a_l23_w2 = float(np.sum((flat_w**2 * np.abs(flat_a)) ** (2.0 / 3.0)) ** 1.5)
    a_l2_w3 = float(np.linalg.norm(flat_w**3 * flat_a))
    a_l2 = float(np.linalg.norm(flat_a))
    trunc_l2 = float(np.linalg.norm(truncated))

    distance = tail_l1w / trunc_l2 if trunc_l2 > 0 else math.inf
    witness = {
        "member": member,
        "max_weighted_core_support": core_budget,
        "r_tilde": r_tilde,
        "tail_l1_omega": tail_l1w,
        "stechkin_step": r_tilde**-0.5 * a_l23_w2,
        "l23_omega2_norm": a_l23_w2,
        "embedding_step": math.sqrt(c1) * a_l2_w3,
        "l2_omega3_norm": a_l2_w3,
        "core_step": math.sqrt(r) * a_l2,
        "l2_norm": a_l2,
        "truncation_l2_norm": trunc_l2,
    }
    if member:
        assert distance <= 1.0 / c * (1 + 1e-9), "distance bound violated on a member"
    return distance, witness


@dataclass(frozen=True)
class CoeffTransform:
    """Triangular map from power-series to orthonormal-basis coefficients.

    ``matrix[m, k]`` is zero unless ``k >= m`` with ``k - m`` even.
    """

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        size = mat.shape[0]
        if mat.shape != (size, size):
            raise ValueError("transform matrix must be square")
        for m in range(size):
            for k in range(size):
                if (k < m or (k - m) % 2) and mat[m, k] != 0.0:
                    raise ValueError("transform matrix violates the parity pattern")
        object.__setattr__(self, "matrix", mat)

    def apply(self, power_coeffs) -> np.ndarray:
        vec = np.asarray(power_coeffs, dtype=float).reshape(-1)
        size = self.matrix.shape[0]
        if vec.size > size:
            raise ValueError("coefficient vector longer than the transform cutoff")
        padded = np.zeros(size)
        padded[: vec.size] = vec
        return self.matrix @ padded


def _log_pochhammer_3_2(j: int) -> float:
    # (3/2)_j = Gamma(j + 3/2) / Gamma(3/2)
    return lgamma(j + 1.5) - lgamma(1.5)


def legendre_transform_matrix(cutoff: int) -> CoeffTransform:
    """Transform ``z^k`` expansions into normalised Legendre coefficients.

    Entry ``(m, m + 2n)`` is
    ``sqrt(2m+1) (m+2n)! / (2^{m+2n} n! (3/2)_{m+n})``, evaluated in log space
    to stay finite for cutoffs of order a few hundred.
    """
    mat = np.zeros((cutoff, cutoff))
    for m in range(cutoff):
        for n in range((cutoff - m - 1) // 2 + 1):
            k = m + 2 * n
            log_t = (
                0.5 * math.log(2 * m + 1)
                + lgamma(k + 1)
                - k * math.log(2.0)
                - lgamma(n + 1)
                - _log_pochhammer_3_2(m + n)
            )
            mat[m, k] = math.exp(log_t)
    return CoeffTransform(matrix=mat)


def hermite_transform_matrix(cutoff: int) -> CoeffTransform:
    """Transform ``z^k`` expansions into normalised probabilist Hermite
    coefficients; entry ``(m, m + 2n)`` is ``(m+2n)! / (2^n n! sqrt(m!))``."""
    mat = np.zeros((cutoff, cutoff))
    for m in range(cutoff):
        for n in range((cutoff - m - 1) // 2 + 1):
            k = m + 2 * n
            log_t = lgamma(k + 1) - n * math.log(2.0) - lgamma(n + 1) - 0.5 * lgamma(m + 1)
            mat[m, k] = math.exp(log_t)
    return CoeffTransform(matrix=mat)


def power_to_legendre(power_coeffs, cutoff: int = 0) -> np.ndarray:
    """Normalised Legendre coefficients of a truncated power series."""
    vec = np.asarray(power_coeffs, dtype=float).reshape(-1)
    size = cutoff or vec.size
    return legendre_transform_matrix(size).apply(vec)


def power_to_hermite(power_coeffs, cutoff: int = 0) -> np.ndarray:
    """Normalised probabilist Hermite coefficients of a truncated power series."""
    vec = np.asarray(power_coeffs, dtype=float).reshape(-1)
    size = cutoff or vec.size
    return hermite_transform_matrix(size).apply(vec)


def legendre_decay_bound(m: int, r: float, c_uea: float, f_norm: float) -> float:
    """Envelope ``f_norm / c_uea * sqrt(2m+1) r^{-m} / (r^2 - 1)``.

    Valid for the Legendre coefficients of analytic quantities whose power
    series decays like ``r^{-k}`` with margin constant ``c_uea``; requires
    ``r > 1``.
    """
    if r <= 1:
        raise ValueError("r must exceed 1")
    if m < 0:
        raise ValueError("m must be nonnegative")
    return f_norm / c_uea * math.sqrt(2 * m + 1) * r**-m / (r**2 - 1.0)


def hermite_decay_bound(m: int, rho: float, c1: float, f_norm: float) -> float:
    """Envelope ``2 f_norm (sqrt(e) + e/2 + s^{m+3}/(1-s)) / sqrt((m-1)!)``
    with ``s = c1/rho``; requires ``rho > c1 > 0`` and ``m >= 1``."""
    if not 0 < c1 < rho:
        raise ValueError("need rho > c1 > 0")
    if m < 1:
        raise ValueError("m must be at least 1")
    s = c1 / rho
    constant = math.sqrt(math.e) + math.e / 2.0 + s ** (m + 3) / (1.0 - s)
    return 2.0 * f_norm * constant * math.exp(-0.5 * lgamma(m))


def write_decay_report(path, coefficients, bounds) -> None:
    """CSV report with columns ``m,coefficient,bound``."""
    coefficients = np.asarray(coefficients, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    with open(path, "w") as fh:
        fh.write("m,coefficient,bound\n")
        for m, (coef, bound) in enumerate(zip(coefficients, bounds)):
            fh.write(f"{m},{coef:.17g},{bound:.17g}\n")


def write_rip_report(path, sample_sizes, delta_hats) -> None:
    """CSV report with columns ``n,delta_hat``."""
    with open(path, "w") as fh:
        fh.write("n,delta_hat\n")
        for n, dh in zip(sample_sizes, delta_hats):
            fh.write(f"{int(n)},{dh:.17g}\n")
