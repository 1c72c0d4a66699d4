"""Experiment runner and report emitter (the ``sptt`` command).

Subcommands::

    sptt run CONFIG [--jobs N] [--out DIR] [--scale desk|paper] [--check]
    sptt demo-appendix-d [--out DIR] [--seed S] [--samples N]
    sptt bounds sample-complexity --r R --delta D --D DIM --p P [--C C]

Config files use a TOML-style ``key = value`` grammar (one assignment per
line, ``#`` comments, quoted strings, ints, floats, booleans, and flat
``[ ... ]`` lists).  Recognised keys: ``experiment``, ``solver``,
``sample_sizes``, ``trials``, ``seed``, ``out``, ``scale``, ``jobs``.

Every run writes ``results.csv`` (columns: experiment, solver, n, trial,
error, rank, nnz, seconds), ``quantiles.csv`` (n, q05, median, q95) and
``errors.svg`` (median error against sample size, one line per solver).
Floats are serialised with 17 significant digits.  Exit codes: 0 success,
1 trial failure or golden mismatch, 2 configuration error.
"""

import argparse
import concurrent.futures
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import analysis, basis as basis_mod, wseq
from .als import SolverConfig, model_class_check, relative_error, sals_fit, ssals_fit
from .darcy import affine_instance_paper, generate_dataset, logaffine_instance_1d
from .optim import SampleSet
from .svg import line_plot_svg

__all__ = ["ExperimentConfig", "ConfigError", "main", "run_experiment", "demo_appendix_d"]

EXPERIMENTS = (
    "affine-darcy",
    "logaffine-darcy",
    "synthetic-recovery",
    "stechkin-study",
    "rip-study",
    "appendix-d-demo",
)

RESULT_COLUMNS = ("experiment", "solver", "n", "trial", "error", "rank", "nnz", "seconds")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    solver: str = "sals"
    sample_sizes: tuple = (100, 316, 1000)
    trials: int = 10
    seed: int = 0
    out: str = "results"
    scale: str = "desk"
    jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.solver not in ("sals", "ssals"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        sizes = tuple(int(n) for n in self.sample_sizes)
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError("sample_sizes must be nonempty and ascending")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.scale not in ("desk", "paper"):
            raise ConfigError(f"scale must be 'desk' or 'paper', got {self.scale!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        object.__setattr__(self, "sample_sizes", sizes)


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return tuple(_parse_value(part) for part in inner.split(",")) if inner else ()
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError as err:
        raise ConfigError(f"cannot parse value {text!r}") from err


def parse_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                values[key.strip()] = _parse_value(value)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return values


def load_config(path: str, overrides: dict) -> ExperimentConfig:
    values = parse_config_file(path)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "experiment" not in values:
        raise ConfigError("config must set 'experiment'")
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**values)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


# ---------------------------------------------------------------------------
# experiment drivers; each trial task returns one results row
# ---------------------------------------------------------------------------


def _solver_config(cfg: ExperimentConfig, n: int, trial: int) -> SolverConfig:
    seed = int(np.random.default_rng([cfg.seed, trial, n, 7]).integers(2**63))
    sweeps = 4 if cfg.experiment in ("affine-darcy", "logaffine-darcy") else 6
    return SolverConfig(max_sweeps=sweeps, time_budget=120.0, seed=seed)


def _problem_setup(cfg: ExperimentConfig):
    """Instance, basis, and weight model shared by all trials."""
    if cfg.experiment == "affine-darcy":
        dim, degree = (5, 10) if cfg.scale == "desk" else (20, 20)
        instance = affine_instance_paper(dim)
        family = basis_mod.legendre(degree)
    elif cfg.experiment == "logaffine-darcy":
        dim, degree = (5, 10) if cfg.scale == "desk" else (20, 20)
        instance = logaffine_instance_1d(dim, decay=1)
        family = basis_mod.hermite(degree, variance_scale=2.0)
    else:
        raise ValueError(cfg.experiment)
    model = basis_mod.weight_model_for(family, dim)
    return instance, family, model


def _synthetic_truth(cfg: ExperimentConfig, trial: int):
    """A weighted-sparse random coefficient tensor over 4 Legendre modes."""
    n_modes, degree, terms = 4, 8, 5
    family = basis_mod.legendre(degree)
    model = basis_mod.weight_model_for(family, n_modes)
    rng = np.random.default_rng([cfg.seed, trial, 11])
    coeffs = np.zeros(model.shape)
    chosen = set()
    while len(chosen) < terms:
        idx = tuple(int(rng.integers(5)) for _ in range(n_modes))
        if idx in chosen or basis_mod.product_weight(model, idx) ** 2 > 30.0:
            continue
        chosen.add(idx)
        coeffs[idx] = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
    return family, model, coeffs


def _sample_function(family, fn, n_modes: int, n: int, seed) -> SampleSet:
    points, weights = basis_mod.sample_parameters(family, n_modes, n, seed)
    return SampleSet(points=points, weights=weights, values=fn(points))


def _fit_trial(cfg: ExperimentConfig, n: int, trial: int) -> dict:
    tick = time.perf_counter()
    if cfg.experiment in ("affine-darcy", "logaffine-darcy"):
        instance, family, model = _problem_setup(cfg)
        train = generate_dataset(instance, family, n, seed=int(
            np.random.default_rng([cfg.seed, trial, n]).integers(2**31)))
        test = generate_dataset(instance, family, 1000, seed=int(
            np.random.default_rng([cfg.seed, trial, 999]).integers(2**31)))
    elif cfg.experiment == "synthetic-recovery":
        family, model, coeffs = _synthetic_truth(cfg, trial)
        n_modes = len(model.shape)

        def fn(points):
            return analysis.evaluate_coefficients(coeffs, family, points)

        train = _sample_function(family, fn, n_modes, n, [cfg.seed, trial, n])
        test = _sample_function(family, fn, n_modes, 1000, [cfg.seed, trial, 999])
    elif cfg.experiment == "appendix-d-demo":
        family = basis_mod.legendre(10)
        model = basis_mod.weight_model_for(family, 4)

        def fn(points):
            return np.exp(np.sum(points, axis=1))

        train = _sample_function(family, fn, 4, n, [cfg.seed, trial, n])
        test = _sample_function(family, fn, 4, 1000, [cfg.seed, trial, 999])
    else:
        raise ValueError(cfg.experiment)

    fit = sals_fit if cfg.solver == "sals" else ssals_fit
    tt, report = fit(train, family, model, _solver_config(cfg, n, trial))
    error = relative_error(tt, family, test)
    return {
        "experiment": cfg.experiment,
        "solver": cfg.solver,
        "n": n,
        "trial": trial,
        "error": float(error),
        "rank": max(tt.rank, default=1),
        "nnz": report.achieved_sparsity,
        "seconds": time.perf_counter() - tick,
    }


def _stechkin_rows(cfg: ExperimentConfig) -> list:
    """Truncation-error study: measured tail against both bound families."""
    size = 4000
    j = np.arange(1, size + 1, dtype=float)
    v = j**-3.0
    omega = j**1.2
    params = wseq.StechkinParams.from_sigma_omega(p=2.0, q=1.0, sigma=1.0 / omega, omega=omega)
    rows = []
    for n in cfg.sample_sizes:
        result = wseq.best_n_term(params, v, int(n))
        classical = wseq.classical_stechkin_bound(v, p=2.0, q=1.0, n=int(n))
        for solver, error in (
            ("tail", result.tail_norm),
            ("weighted-bound", result.bound),
            ("classical-bound", classical),
        ):
            rows.append({
                "experiment": cfg.experiment, "solver": solver, "n": int(n),
                "trial": 0, "error": float(error), "rank": 0, "nnz": 0, "seconds": 0.0,
            })
    return rows


def _rip_rows(cfg: ExperimentConfig, out_dir: str) -> list:
    family = basis_mod.legendre(6)
    model = basis_mod.weight_model_for(family, 3)
    rows, deltas = [], []
    for trial in range(cfg.trials):
        for n in cfg.sample_sizes:
            tick = time.perf_counter()
            points, weights = basis_mod.sample_parameters(
                family, 3, int(n), [cfg.seed, trial, n]
            )
            samples = SampleSet(points=points, weights=weights, values=np.zeros(int(n)))
            estimate = analysis.rip_probe(
                samples, family, "ball", n_probes=50,
                seed=int(np.random.default_rng([cfg.seed, trial, n, 3]).integers(2**31)),
                weight_model=model, r=10.0,
            )
            rows.append({
                "experiment": cfg.experiment, "solver": estimate.descriptor, "n": int(n),
                "trial": trial, "error": estimate.delta_hat, "rank": 0,
                "nnz": estimate.probe_count, "seconds": time.perf_counter() - tick,
            })
            if trial == 0:
                deltas.append(estimate.delta_hat)
    analysis.write_rip_report(os.path.join(out_dir, "rip_report.csv"),
                              cfg.sample_sizes, deltas)
    return rows


# ---------------------------------------------------------------------------
# artifact writing
# ---------------------------------------------------------------------------


def _results_text(rows) -> str:
    lines = [",".join(RESULT_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[col]) for col in RESULT_COLUMNS))
    return "\n".join(lines) + "\n"


def _quantiles_text(rows) -> str:
    by_n = {}
    for row in rows:
        by_n.setdefault(row["n"], []).append(row["error"])
    lines = ["n,q05,median,q95"]
    for n in sorted(by_n):
        errs = np.array(by_n[n])
        q05, med, q95 = np.quantile(errs, [0.05, 0.5, 0.95])
        lines.append(f"{n},{q05:.17g},{med:.17g},{q95:.17g}")
    return "\n".join(lines) + "\n"


def _median_series(rows) -> dict:
    series = {}
    for row in rows:
        series.setdefault(row["solver"], {}).setdefault(row["n"], []).append(row["error"])
    plot = {}
    for solver, by_n in series.items():
        ns = sorted(by_n)
        plot[solver] = (ns, [float(np.median(by_n[n])) for n in ns])
    return plot


def _validate_results_schema(path: str) -> None:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != ",".join(RESULT_COLUMNS):
            raise ValueError(f"bad results header in {path}")
        for line in fh:
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != len(RESULT_COLUMNS):
                raise ValueError(f"bad results row in {path}: {line!r}")
            int(parts[2]), int(parts[3]), float(parts[4])
            int(parts[5]), int(parts[6]), float(parts[7])


def _normalise_seconds(text: str) -> str:
    lines = text.strip().split("\n")
    out = [lines[0]]
    for line in lines[1:]:
        parts = line.split(",")
        parts[-1] = "0"
        out.append(",".join(parts))
    return "\n".join(out)


def _write_or_check(path: str, text: str, check: bool, normalise=None) -> bool:
    """Write an artifact, or compare against the stored golden with --check.

    Returns True when the artifact matches (or was created)."""
    if check and os.path.exists(path):
        with open(path) as fh:
            stored = fh.read()
        canon = normalise or (lambda t: t)
        if canon(stored) != canon(text):
            print(f"golden mismatch: {path}", file=sys.stderr)
            return False
        return True
    with open(path, "w") as fh:
        fh.write(text)
    return True


def run_experiment(cfg: ExperimentConfig, check: bool = False) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    failures = []
    if cfg.experiment == "stechkin-study":
        rows = _stechkin_rows(cfg)
    elif cfg.experiment == "rip-study":
        rows = _rip_rows(cfg, cfg.out)
    elif cfg.experiment == "appendix-d-demo":
        tick = time.perf_counter()
        summary = demo_appendix_d(cfg.out, seed=cfg.seed, n=cfg.sample_sizes[-1])
        rows = [
            {
                "experiment": cfg.experiment,
                "solver": name,
                "n": cfg.sample_sizes[-1],
                "trial": 0,
                "error": summary[name]["test_error"],
                "rank": max(summary[name]["rank"], default=1),
                "nnz": summary[name]["core_parameters"],
                "seconds": time.perf_counter() - tick,
            }
            for name in ("sals", "ssals")
        ]
    else:
        tasks = [(n, trial) for trial in range(cfg.trials) for n in cfg.sample_sizes]
        rows = []
        if cfg.jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                futures = {
                    pool.submit(_fit_trial, cfg, n, trial): (n, trial)
                    for n, trial in tasks
                }
                done = {}
                for future in concurrent.futures.as_completed(futures):
                    key = futures[future]
                    try:
                        done[key] = future.result()
                    except Exception as err:  # noqa: BLE001 - trial isolation
                        failures.append((key, err))
                rows = [done[key] for key in tasks if key in done]
        else:
            for n, trial in tasks:
                try:
                    rows.append(_fit_trial(cfg, n, trial))
                except Exception as err:  # noqa: BLE001 - trial isolation
                    failures.append(((n, trial), err))

    rows.sort(key=lambda r: (r["trial"], r["n"], r["solver"]))
    ok = _write_or_check(
        os.path.join(cfg.out, "results.csv"),
        _results_text(rows),
        check,
        normalise=_normalise_seconds,
    )
    _validate_results_schema(os.path.join(cfg.out, "results.csv"))
    if rows and not failures:
        ok &= _write_or_check(
            os.path.join(cfg.out, "quantiles.csv"), _quantiles_text(rows), check
        )
        if not check or not os.path.exists(os.path.join(cfg.out, "errors.svg")):
            line_plot_svg(
                os.path.join(cfg.out, "errors.svg"),
                _median_series(rows),
                xlabel="sample size n",
                ylabel="median relative error",
                title=cfg.experiment,
            )
    for key, err in failures:
        print(f"trial {key} failed: {err}", file=sys.stderr)
    if failures or not ok:
        return 1
    return 0


def demo_appendix_d(out_dir: str = "results", seed: int = 0, n: int = 1000) -> dict:
    """Fit the separable exponential with both solvers at a matched budget.

    Reports relative test errors, the core parameter counts (largest core
    support over all canonicalisation positions), and the per-degree sup-norm
    table showing where ``sqrt(2j+1)`` starts to dominate ``e``, the sup norm
    of a near-exact polynomial surrogate of ``exp`` on [-1, 1].
    """
    os.makedirs(out_dir, exist_ok=True)
    n_modes, degree = 4, 10
    family = basis_mod.legendre(degree)
    model = basis_mod.weight_model_for(family, n_modes)

    def fn(points):
        return np.exp(np.sum(points, axis=1))

    train = _sample_function(family, fn, n_modes, n, [seed, 0])
    test = _sample_function(family, fn, n_modes, 1000, [seed, 1])
    config = SolverConfig(max_sweeps=6, seed=seed, time_budget=600.0)

    summary = {}
    for name, fit in (("sals", sals_fit), ("ssals", ssals_fit)):
        tt, report = fit(train, family, model, config)
        variant = "sparse" if name == "sals" else "omega"
        membership = model_class_check(tt, model, rank_bound=10**9,
                                       weighted_budget=math.inf, variant=variant)
        summary[name] = {
            "test_error": float(relative_error(tt, family, test)),
            "core_parameters": membership.max_core_nnz,
            "rank": list(tt.rank),
            "sweeps": report.sweeps,
            "seconds": report.wall_time,
        }

    table = []
    for j in range(degree):
        weight = math.sqrt(2 * j + 1)
        table.append({"j": j, "weight": weight, "exceeds_e": weight >= math.e})
    summary["supnorm_table"] = table
    summary["e"] = math.e

    with open(os.path.join(out_dir, "appendix_d.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    with open(os.path.join(out_dir, "supnorm_table.csv"), "w") as fh:
        fh.write("j,sqrt_2j_plus_1,e,weight_ge_e\n")
        for row in table:
            fh.write(f"{row['j']},{row['weight']:.17g},{math.e:.17g},{int(row['exceeds_e'])}\n")
    return summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sptt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--jobs", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--scale", choices=("desk", "paper"), default=None)
    p_run.add_argument("--check", action="store_true",
                       help="compare artifacts against stored goldens")

    p_demo = sub.add_parser("demo-appendix-d", help="rank-1 exponential demo")
    p_demo.add_argument("--out", default="results")
    p_demo.add_argument("--seed", type=int, default=0)
    p_demo.add_argument("--samples", type=int, default=1000)

    p_bounds = sub.add_parser("bounds", help="sample-complexity calculators")
    bounds_sub = p_bounds.add_subparsers(dest="bound", required=True)
    p_sc = bounds_sub.add_parser("sample-complexity")
    p_sc.add_argument("--r", type=float, required=True)
    p_sc.add_argument("--delta", type=float, required=True)
    p_sc.add_argument("--D", type=float, required=True, dest="dim")
    p_sc.add_argument("--p", type=float, required=True)
    p_sc.add_argument("--C", type=float, default=1.0)

    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            cfg = load_config(
                args.config,
                {"jobs": args.jobs, "out": args.out, "scale": args.scale},
            )
        except ConfigError as err:
            print(f"config error: {err}", file=sys.stderr)
            return 2
        return run_experiment(cfg, check=args.check)

    if args.command == "demo-appendix-d":
        summary = demo_appendix_d(args.out, seed=args.seed, n=args.samples)
        print(json.dumps(summary, indent=2))
        return 0

    if args.command == "bounds":
        n = analysis.sample_bound(args.r, args.delta, args.dim, args.p, args.C)
        print(n)
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
