"""1D P1 finite-element data generator for the parametric diffusion problem.

The boundary value problem is ``-(a(x, y) u'(x, y))' = f(x)`` on the unit
interval with homogeneous Dirichlet conditions.  Two coefficient families are
provided: an affine one,

    ``a(x, y) = a0 + sum_m ceil(m/2)^{-2} g_m(x) y_m``

with ``g_m`` alternating cosine/sine at frequency ``ceil(m/2) pi`` and
uniformly distributed parameters, and a log-affine one,

    ``ln a(x, y) = S sum_m m^{-decay} sin(m pi x) y_m``

with Gaussian parameters.  Stiffness matrices use the midpoint-evaluated
coefficient per element (one-point quadrature) and loads the midpoint rule,
so nodal accuracy is O(h^2).
"""

import hashlib
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .basis import BasisFamily, sample_parameters
from .optim import SampleSet

__all__ = [
    "DarcyInstance",
    "CoefficientError",
    "coefficient",
    "p1_solve",
    "solve",
    "qoi_integral",
    "energy_seminorm",
    "forcing_dual_norm",
    "affine_instance_paper",
    "logaffine_instance_1d",
    "certify_uea",
    "generate_dataset",
]

LOGAFFINE_AMPLITUDES = {1: 2.4, 2: 1.9}


class CoefficientError(ValueError):
    """Raised when the diffusion coefficient is nonpositive at a quadrature
    point; carries the offending location."""

    def __init__(self, x: float, value: float):
        super().__init__(f"coefficient {value:g} <= 0 at x = {x:g}")
        self.x = x
        self.value = value


@dataclass(frozen=True)
class DarcyInstance:
    """A fixed diffusion problem family over its parameter domain."""

    kind: str  # "affine" | "logaffine"
    dim: int  # number of parameters L
    n_elements: int
    a0: float
    amplitude: float
    decay: int
    forcing: float

    def __post_init__(self):
        if self.kind not in ("affine", "logaffine"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("parameter dimension must be at least 1")
        if self.n_elements < 2:
            raise ValueError("need at least 2 elements (3 nodes)")

    @property
    def n_nodes(self) -> int:
        return self.n_elements + 1

    @property
    def mesh_width(self) -> float:
        return 1.0 / self.n_elements

    def fingerprint(self) -> str:
        text = (
            f"{self.kind}-L{self.dim}-ne{self.n_elements}-a0{self.a0:.17g}"
            f"-amp{self.amplitude:.17g}-decay{self.decay}-f{self.forcing:.17g}"
        )
        return hashlib.sha1(text.encode("ascii")).hexdigest()[:16]


def _affine_terms(instance: DarcyInstance, x: np.ndarray) -> np.ndarray:
    """Matrix of the scaled expansion functions, shape (len(x), L)."""
    terms = np.empty((x.size, instance.dim))
    for m in range(1, instance.dim + 1):
        freq = (m + 1) // 2
        scale = instance.amplitude * freq ** (-2.0)
        wave = np.cos(freq * math.pi * x) if m % 2 == 1 else np.sin(freq * math.pi * x)
        terms[:, m - 1] = scale * wave
    return terms


def _logaffine_terms(instance: DarcyInstance, x: np.ndarray) -> np.ndarray:
    terms = np.empty((x.size, instance.dim))
    for m in range(1, instance.dim + 1):
        terms[:, m - 1] = (
            instance.amplitude * m ** (-float(instance.decay)) * np.sin(m * math.pi * x)
        )
    return terms


def coefficient(instance: DarcyInstance, x, y) -> np.ndarray:
    """Diffusion coefficient ``a(x, y)`` vectorised over locations ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != instance.dim:
        raise ValueError(f"expected {instance.dim} parameters, got {y.size}")
    if instance.kind == "affine":
        return instance.a0 + _affine_terms(instance, x) @ y
    return np.exp(_logaffine_terms(instance, x) @ y)


def p1_solve(a_mid: np.ndarray, f_mid: np.ndarray, n_elements: int) -> np.ndarray:
    """P1 Galerkin solve from per-element midpoint coefficient/load values.

    Homogeneous Dirichlet conditions; returns all nodal values including the
    zero endpoints.  The tridiagonal system is solved in symmetric banded
    form.
    """
    h = 1.0 / n_elements
    a_mid = np.asarray(a_mid, dtype=float)
    f_mid = np.asarray(f_mid, dtype=float)
    if a_mid.shape != (n_elements,) or f_mid.shape != (n_elements,):
        raise ValueError("need one coefficient and load value per element")

    diag = (a_mid[:-1] + a_mid[1:]) / h
    upper = -a_mid[1:-1] / h
    banded = np.zeros((2, n_elements - 1))
    banded[0, 1:] = upper
    banded[1] = diag
    load = (f_mid[:-1] + f_mid[1:]) * h / 2.0

    interior = solveh_banded(banded, load)
    u = np.zeros(n_elements + 1)
    u[1:-1] = interior
    return u


def solve(instance: DarcyInstance, y) -> np.ndarray:
    """Nodal solution of the instance at one parameter point."""
    n_el = instance.n_elements
    mid = (np.arange(n_el) + 0.5) / n_el
    a_mid = coefficient(instance, mid, y)
    bad = np.flatnonzero(a_mid <= 0)
    if bad.size:
        raise CoefficientError(x=float(mid[bad[0]]), value=float(a_mid[bad[0]]))
    f_mid = np.full(n_el, instance.forcing)
    return p1_solve(a_mid, f_mid, n_el)


def qoi_integral(u: np.ndarray, mesh_width: float = 0.0) -> float:
    """Integral of the P1 interpolant over [0, 1] (trapezoidal, exact for P1)."""
    u = np.asarray(u, dtype=float)
    h = mesh_width or 1.0 / (u.size - 1)
    return float(h * (np.sum(u) - 0.5 * (u[0] + u[-1])))


def energy_seminorm(u: np.ndarray, mesh_width: float = 0.0) -> float:
    """Discrete H1 seminorm ``sqrt(sum (u_{i+1} - u_i)^2 / h)``."""
    u = np.asarray(u, dtype=float)
    h = mesh_width or 1.0 / (u.size - 1)
    return math.sqrt(float(np.sum(np.diff(u) ** 2) / h))


def forcing_dual_norm(instance: DarcyInstance) -> float:
    """Dual norm of the constant forcing, i.e. the energy norm of the
    unit-coefficient solution (``5/sqrt(3) * f/10`` analytically for f const)."""
    n_el = instance.n_elements
    f_mid = np.full(n_el, instance.forcing)
    u = p1_solve(np.ones(n_el), f_mid, n_el)
    return energy_seminorm(u, instance.mesh_width)


def affine_instance_paper(dim: int, n_elements: int = 50, forcing: float = 10.0) -> DarcyInstance:
    """The affine benchmark: ``a0 = 1/10 + pi^2/3`` and trigonometric terms
    with inverse-square frequency scaling."""
    return DarcyInstance(
        kind="affine",
        dim=dim,
        n_elements=n_elements,
        a0=0.1 + math.pi**2 / 3.0,
        amplitude=1.0,
        decay=2,
        forcing=forcing,
    )


def logaffine_instance_1d(dim: int, decay: int, amplitude: float = 0.0,
                          n_elements: int = 50, forcing: float = 1.0) -> DarcyInstance:
    """Log-affine family with ``m^{-decay}`` spectral decay, decay in {1, 2}.

    The default amplitudes are 2.4 for decay 1 and 1.9 for decay 2.
    """
    if decay not in LOGAFFINE_AMPLITUDES:
        raise ValueError("decay must be 1 or 2")
    return DarcyInstance(
        kind="logaffine",
        dim=dim,
        n_elements=n_elements,
        a0=1.0,
        amplitude=amplitude or LOGAFFINE_AMPLITUDES[decay],
        decay=decay,
        forcing=forcing,
    )


def certify_uea(instance: DarcyInstance, rho: float = 1.0, n_grid: int = 4001) -> float:
    """Uniform ellipticity margin ``min_x a0 - rho sum_m |a_m(x)|`` on a grid.

    Positive return value certifies well-posedness of the affine family for
    all parameters in ``[-rho, rho]^L``.
    """
    if instance.kind != "affine":
        raise ValueError("the ellipticity margin applies to the affine family")
    x = np.linspace(0.0, 1.0, n_grid)
    terms = _affine_terms(instance, x)
    return float(np.min(instance.a0 - rho * np.sum(np.abs(terms), axis=1)))


def _cache_file(cache_dir, instance, seed, n, basis) -> str:
    name = (
        f"darcy-{instance.fingerprint()}-{basis.kind}{basis.size}"
        f"-v{basis.variance_scale:g}-seed{seed}-n{n}.csv"
    )
    return os.path.join(cache_dir, name)


def _write_dataset(path, instance, seed, samples: SampleSet) -> None:
    n, dim = samples.points.shape
    with open(path, "w") as fh:
        fh.write(f"# hash={instance.fingerprint()} seed={seed} n={n} L={dim}\n")
        header = ",".join(f"y{j + 1}" for j in range(dim))
        fh.write(f"{header},w,u\n")
        for i in range(n):
            point = ",".join(f"{v:.17g}" for v in samples.points[i])
            fh.write(f"{point},{samples.weights[i]:.17g},{samples.values[i]:.17g}\n")


def _read_dataset(path, dim: int) -> SampleSet:
    with open(path) as fh:
        fh.readline()  # hash header
        fh.readline()  # column header
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row] for row in rows])
    return SampleSet(points=data[:, :dim], weights=data[:, dim], values=data[:, dim + 1])


def generate_dataset(instance: DarcyInstance, basis: BasisFamily, n: int, seed: int,
                     cache_dir=None) -> SampleSet:
    """Draw parameters, solve, and evaluate the integral quantity of interest.

    Deterministic for a given seed.  With ``cache_dir`` the dataset is stored
    as one CSV per (instance, basis, seed, n) and reread on later calls; the
    17-significant-digit format round-trips doubles exactly.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    path = None
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        path = _cache_file(cache_dir, instance, seed, n, basis)
        if os.path.exists(path):
            return _read_dataset(path, instance.dim)

    points, weights = sample_parameters(basis, instance.dim, n, seed)
    values = np.empty(n)
    for i in range(n):
        try:
            u = solve(instance, points[i])
        except CoefficientError as err:
            raise CoefficientError(err.x, err.value) from ValueError(
                f"solver failed at sample {i}"
            )
        values[i] = qoi_integral(u, instance.mesh_width)
    samples = SampleSet(points=points, weights=weights, values=values)
    if path is not None:
        _write_dataset(path, instance, seed, samples)
    return samples
