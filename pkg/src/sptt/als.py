"""Alternating least-squares solvers over canonicalised tensor trains.

``sals_fit`` sweeps a sparse canonicalisation through the train and solves a
cross-validated weighted LASSO for each core; the rank adapts implicitly
because every bond dimension is tied to the sparsity of the neighbouring
cores.  ``ssals_fit`` replaces the sparse QC decomposition by the
weight-orthogonal one, which keeps ranks minimal but loses the implicit
adaptivity; ranks are therefore adapted explicitly by splitting each bond's
singular values into a significant group and a small buffer that is grown
with random directions or dropped as the fit evolves.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisFamily, WeightModel
from .decomp import canonicalise_omega, canonicalise_sparse, clean_array
from .optim import SampleSet, assemble_micro, cv_select, empirical_norm, mode_value_stacks
from .tensor import TensorTrain, tt_zero

__all__ = [
    "SolverConfig",
    "FitReport",
    "ModelClassReport",
    "tt_predict",
    "relative_error",
    "sals_fit",
    "ssals_fit",
    "model_class_check",
]


@dataclass(frozen=True)
class SolverConfig:
    """Budgets, cross-validation and rank-adaptation knobs for the solvers.

    The rank adaptation triple (threshold_factor, buffer_size,
    perturbation_scale) only affects ``ssals_fit``.  ``time_budget`` is in
    seconds and is checked between microsteps, never inside a solve.
    """

    max_sweeps: int = 8
    time_budget: float = math.inf
    cv_folds: int = 10
    stagnation_tol: float = 1e-4
    threshold_factor: float = 1e-2
    buffer_size: int = 2
    perturbation_scale: float = 1e-3
    seed: int = 0
    validation_fraction: float = 0.2
    lambda_count: int = 50
    lambda_min_ratio: float = 1e-6
    debias: bool = True
    max_rank: int = 0  # 0 means no explicit cap
    prune_tol: float = 1e-8

    def __post_init__(self):
        if self.max_sweeps < 1 or self.time_budget <= 0:
            raise ValueError("budgets must be positive")
        if self.buffer_size < 1:
            raise ValueError("buffer_size must be at least 1")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in (0, 1)")


@dataclass
class FitReport:
    """Per-sweep and per-microstep diagnostics of one fit."""

    train_errors: list = field(default_factory=list)
    val_errors: list = field(default_factory=list)
    best_val_errors: list = field(default_factory=list)
    microstep_lambdas: list = field(default_factory=list)
    microstep_nnz: list = field(default_factory=list)
    microstep_weighted_nnz: list = field(default_factory=list)
    final_rank: tuple = ()
    sweeps: int = 0
    wall_time: float = 0.0
    termination: str = ""

    @property
    def achieved_sparsity(self) -> int:
        """Largest core support over all microsteps (the effective R)."""
        return max(self.microstep_nnz, default=0)

    @property
    def achieved_weighted_sparsity(self) -> float:
        """Largest weighted core support over all microsteps (the effective r)."""
        return max(self.microstep_weighted_nnz, default=0.0)

    def to_json(self) -> dict:
        return {
            "train_errors": list(self.train_errors),
            "val_errors": list(self.val_errors),
            "best_val_errors": list(self.best_val_errors),
            "microstep_lambdas": list(self.microstep_lambdas),
            "microstep_nnz": [int(v) for v in self.microstep_nnz],
            "microstep_weighted_nnz": list(self.microstep_weighted_nnz),
            "final_rank": list(self.final_rank),
            "sweeps": self.sweeps,
            "wall_time": self.wall_time,
            "termination": self.termination,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def tt_predict(tt: TensorTrain, basis: BasisFamily, points) -> np.ndarray:
    """Evaluate the function with coefficient tensor ``tt`` at sample points."""
    phi = mode_value_stacks(basis, points)
    if len(phi) != tt.order:
        raise ValueError("points must have one column per tensor mode")
    acc = np.ones((phi[0].shape[0], 1))
    for j, comp in enumerate(tt.components):
        acc = np.einsum("na,adb,nd->nb", acc, comp, phi[j], optimize=True)
    return acc[:, 0]


def relative_error(tt: TensorTrain, basis: BasisFamily, samples: SampleSet) -> float:
    """Relative empirical-norm error of the fitted function on a sample set."""
    residual = samples.values - tt_predict(tt, basis, samples.points)
    denom = empirical_norm(samples.values, samples.weights)
    num = empirical_norm(residual, samples.weights)
    return num / denom if denom > 0 else num


def _initial_tt(shape, mean: float) -> TensorTrain:
    comps = []
    for j, d in enumerate(shape):
        comp = np.zeros((1, d, 1))
        comp[0, 0, 0] = mean if j == 0 else 1.0
        comps.append(comp)
    return TensorTrain(tuple(comps))


def _schedule(n_modes: int):
    forward = [(k, +1) for k in range(n_modes)]
    backward = [(k, -1) for k in range(n_modes - 2, -1, -1)]
    return forward + backward


def _orthonormal_extension(basis_cols: np.ndarray, count: int, rng) -> np.ndarray:
    """Random columns orthonormal to ``basis_cols`` (and each other)."""
    dim = basis_cols.shape[0]
    added = []
    for _ in range(count):
        if basis_cols.shape[1] + len(added) >= dim:
            break
        g = rng.standard_normal(dim)
        for _ in range(2):
            g -= basis_cols @ (basis_cols.T @ g)
            for col in added:
                g -= col * (col @ g)
        norm = np.linalg.norm(g)
        if norm < 1e-12:
            break
        added.append(g / norm)
    return np.stack(added, axis=1) if added else np.zeros((dim, 0))


def _adapt_bond(tt: TensorTrain, k: int, direction: int, config: SolverConfig, rng):
    """SALSA-style two-group rank adaptation of the bond in travel direction.

    Singular values above ``threshold_factor`` times the largest form the
    significant group; a buffer of ``buffer_size`` small directions is kept on
    top, padding with random directions of magnitude ``perturbation_scale``
    times the largest singular value when the decomposition offers too few.
    """
    if direction > 0 and k >= tt.order - 1:
        return tt
    if direction < 0 and k <= 0:
        return tt
    comps = list(tt.components)
    core = comps[k]
    rl, d, rr = core.shape

    if direction > 0:
        mat = core.reshape(rl * d, rr)
    else:
        mat = core.reshape(rl, d * rr).T
    if not np.any(mat):
        return tt
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    smax = s[0]
    if smax <= 0:
        return tt
    keep = max(1, int(np.sum(s >= config.threshold_factor * smax)))
    target = keep + config.buffer_size
    cap = mat.shape[0]
    if config.max_rank:
        cap = min(cap, config.max_rank)
    target = min(target, cap)

    take = min(target, s.size)
    u2, s2, v2 = u[:, :take], s[:take], vt[:take]
    if target > take:
        extra = _orthonormal_extension(u2, target - take, rng)
        if extra.shape[1]:
            u2 = np.hstack([u2, extra])
            s2 = np.concatenate([s2, np.full(extra.shape[1], config.perturbation_scale * smax)])
            rows = rng.standard_normal((extra.shape[1], v2.shape[1]))
            rows /= np.linalg.norm(rows, axis=1, keepdims=True)
            v2 = np.vstack([v2, rows])
    carry = s2[:, None] * v2

    if direction > 0:
        comps[k] = u2.reshape(rl, d, -1)
        comps[k + 1] = np.tensordot(carry, comps[k + 1], axes=1)
    else:
        comps[k] = u2.T.reshape(-1, d, rr)
        comps[k - 1] = np.tensordot(comps[k - 1], carry.T, axes=1)
    return TensorTrain(tuple(comps))


def _prune_tt(tt: TensorTrain, rel_tol: float) -> TensorTrain:
    """Drop singular directions below ``rel_tol`` of each bond's largest."""
    comps = [c.copy() for c in tt.components]
    m = len(comps)
    for j in range(m - 1, 0, -1):
        rl, d, rr = comps[j].shape
        q, r = np.linalg.qr(comps[j].reshape(rl, d * rr).T)
        comps[j] = q.T.reshape(-1, d, rr)
        comps[j - 1] = np.tensordot(comps[j - 1], r.T, axes=1)
    for j in range(m - 1):
        rl, d, rr = comps[j].shape
        u, s, vt = np.linalg.svd(comps[j].reshape(rl * d, rr), full_matrices=False)
        if s.size == 0 or s[0] == 0.0:
            rank = 1
            u = np.zeros((rl * d, 1))
            s = np.zeros(1)
            vt = np.zeros((1, rr))
        else:
            rank = max(1, int(np.sum(s > rel_tol * s[0])))
        comps[j] = u[:, :rank].reshape(rl, d, rank)
        comps[j + 1] = np.tensordot(s[:rank, None] * vt[:rank], comps[j + 1], axes=1)
    return TensorTrain(tuple(comps))


def _check_inputs(samples: SampleSet, basis: BasisFamily, weight_model: WeightModel):
    n_modes = samples.points.shape[1]
    if weight_model.n_modes != n_modes:
        raise ValueError("weight model and samples disagree on the number of modes")
    if any(size != basis.size for size in weight_model.shape):
        raise ValueError("weight model size must match the basis size")


def _fit(samples, basis, weight_model, config, canonicalise, adapt: bool):
    _check_inputs(samples, basis, weight_model)
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    n = len(samples)
    n_modes = samples.points.shape[1]
    shape = (basis.size,) * n_modes

    report = FitReport()
    if empirical_norm(samples.values, samples.weights) == 0.0:
        report.termination = "zero observations"
        report.final_rank = tt_zero(shape).rank
        report.wall_time = time.perf_counter() - t0
        return tt_zero(shape), report

    n_val = min(max(1, int(round(config.validation_fraction * n))), n - 1)
    perm = rng.permutation(n)
    val_set = samples.subset(perm[:n_val])
    train_set = samples.subset(perm[n_val:])

    mean = float(np.mean(train_set.values))
    tt = _initial_tt(shape, mean)
    best_val = math.inf
    best_tt = tt
    schedule = _schedule(n_modes)
    mode_weights = weight_model.mode_weights
    stopped = ""

    for sweep in range(config.max_sweeps):
        for k, direction in schedule:
            if time.perf_counter() - t0 > config.time_budget:
                stopped = "time budget"
                break
            form = canonicalise(tt, k, mode_weights)
            problem = assemble_micro(
                train_set,
                form,
                basis,
                lambda_count=config.lambda_count,
                lambda_min_ratio=config.lambda_min_ratio,
                cv_folds=config.cv_folds,
            )
            lam, core = cv_select(
                problem, seed=int(rng.integers(2**63)), debias=config.debias
            )
            core = clean_array(core)
            support = core != 0
            report.microstep_lambdas.append(lam)
            report.microstep_nnz.append(int(np.count_nonzero(support)))
            report.microstep_weighted_nnz.append(
                float(np.sum(form.core_weights[support] ** 2))
            )
            tt = TensorTrain(form.left + (core,) + form.right)
            if adapt:
                tt = _adapt_bond(tt, k, direction, config, rng)
        report.sweeps = sweep + 1
        train_err = relative_error(tt, basis, train_set)
        val_err = relative_error(tt, basis, val_set)
        report.train_errors.append(train_err)
        report.val_errors.append(val_err)
        if val_err < best_val:
            best_val = val_err
            best_tt = tt
        report.best_val_errors.append(best_val)
        if stopped:
            break
        if best_val <= 1e-14:
            stopped = "converged"
            break
        if sweep >= 2:
            prev = report.best_val_errors[-3]
            if prev - best_val < config.stagnation_tol * max(prev, 1e-300):
                stopped = "stagnation"
                break
    report.termination = stopped or "max sweeps"

    if adapt:
        best_tt = _prune_tt(best_tt, config.prune_tol)
    report.final_rank = best_tt.rank
    report.wall_time = time.perf_counter() - t0
    return best_tt, report


def sals_fit(samples: SampleSet, basis: BasisFamily, weight_model: WeightModel,
             config: SolverConfig = SolverConfig()):
    """Sparse ALS: sparse canonicalisation plus cross-validated LASSO cores.

    Returns the coefficient train with the best recorded validation error and
    a :class:`FitReport`.  The bond dimensions follow the core supports, so no
    explicit rank adaptation is performed.
    """
    return _fit(samples, basis, weight_model, config, canonicalise_sparse, adapt=False)


def ssals_fit(samples: SampleSet, basis: BasisFamily, weight_model: WeightModel,
              config: SolverConfig = SolverConfig()):
    """Semi-sparse ALS: weight-orthogonal canonicalisation with rank buffers.

    Identical to :func:`sals_fit` except that every sparse QC decomposition is
    replaced by the weight-orthogonal one and bond ranks are adapted by the
    two-group singular-value strategy; the returned train is pruned of
    directions below ``prune_tol`` relative to each bond's largest singular
    value.
    """
    return _fit(samples, basis, weight_model, config, canonicalise_omega, adapt=True)


@dataclass(frozen=True)
class ModelClassReport:
    """Membership diagnostics of a train against rank/sparsity budgets."""

    rank_bound: int
    weighted_budget: float
    max_rank: int
    max_core_nnz: int
    max_weighted_l0: float
    max_orthogonality_residual: float
    per_position: tuple

    @property
    def rank_ok(self) -> bool:
        return self.max_rank <= self.rank_bound

    @property
    def sparsity_ok(self) -> bool:
        return self.max_weighted_l0 <= self.weighted_budget * (1 + 1e-12)

    @property
    def is_member(self) -> bool:
        return self.rank_ok and self.sparsity_ok and self.max_orthogonality_residual <= 1e-10


def model_class_check(tt: TensorTrain, weight_model: WeightModel, rank_bound: int,
                      weighted_budget: float, variant: str = "sparse") -> ModelClassReport:
    """Canonicalise at every core position and report the worst-case stats.

    ``variant`` selects the decomposition ("sparse" or "omega").  Membership in
    the corresponding model class requires all ranks at or below
    ``rank_bound``, weighted core support within ``weighted_budget``, and
    orthogonal non-core components at every position.
    """
    if variant == "sparse":
        canonicalise = canonicalise_sparse
    elif variant == "omega":
        canonicalise = canonicalise_omega
    else:
        raise ValueError(f"unknown variant {variant!r}")

    rows = []
    for k in range(tt.order):
        form = canonicalise(tt, k, weight_model.mode_weights)
        canonical_tt = form.to_tt()
        ranks = canonical_tt.rank
        support = form.core != 0
        weighted_l0 = float(np.sum(form.core_weights[support] ** 2))
        residual = 0.0
        for comp in form.left:
            g = comp.reshape(-1, comp.shape[2])
            residual = max(residual, float(np.linalg.norm(g.T @ g - np.eye(g.shape[1]))))
        for comp in form.right:
            g = comp.reshape(comp.shape[0], -1)
            residual = max(residual, float(np.linalg.norm(g @ g.T - np.eye(g.shape[0]))))
        rows.append(
            {
                "core_position": k,
                "rank": max(ranks) if ranks else 1,
                "core_nnz": int(np.count_nonzero(support)),
                "weighted_l0": weighted_l0,
                "orthogonality_residual": residual,
            }
        )
    return ModelClassReport(
        rank_bound=rank_bound,
        weighted_budget=weighted_budget,
        max_rank=max(row["rank"] for row in rows),
        max_core_nnz=max(row["core_nnz"] for row in rows),
        max_weighted_l0=max(row["weighted_l0"] for row in rows),
        max_orthogonality_residual=max(row["orthogonality_residual"] for row in rows),
        per_position=tuple(rows),
    )
