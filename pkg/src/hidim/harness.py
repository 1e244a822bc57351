"""Sweeps over (alpha, SNR, procedure): theory, Monte Carlo, comparison, output."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__
from .convex import TabulatedConvexFunction
from .distributions import ScalarDistribution
from .errors import ConfigError, HidimError
from .estimator import (SolverOptions, generate_instance, solve_m_estimation,
                        solve_noiseless_constrained, trial_seed)
from .mft import (MFTProblem, predict_performance, quadratic_order_parameters,
                  solve_rs_equations)
from .optimal import (build_optimal_pair, build_rho_opt_unregularized, high_dim_lower_bound,
                      noiseless_bound, noiseless_qopt, optimal_loss, optimal_train_gen,
                      solve_qopt_regularized, unregularized_bound)

log = logging.getLogger(__name__)

METRICS = ("q_s", "q_eps", "e_train", "e_gen")
CSV_COLUMNS = ("procedure", "alpha", "snr", "metric", "theory", "bound", "mc_mean",
               "mc_std", "trials", "converged")
PROCEDURES = ("ml", "map", "quadratic", "quadratic_optimal", "optimal",
              "optimal_unregularized", "custom")
UNREGULARIZED = ("ml", "quadratic", "optimal_unregularized")


# -------------------------------------------------------------------- config
@dataclass
class Procedure:
    name: str
    label: str
    rho_path: Optional[str] = None
    sigma_path: Optional[str] = None


@dataclass
class SweepConfig:
    noise: Optional[ScalarDistribution]
    signal: ScalarDistribution
    alpha_grid: List[float]
    snr_grid: Optional[List[float]]
    procedures: List[Procedure]
    sqrt_NP: float = 250.0
    trials: int = 20
    base_seed: int = 0
    test_rows: int = 2000
    solver: dict = field(default_factory=dict)
    workers: int = 1
    output_dir: str = "."
    output_format: str = "csv"
    source: dict = field(default_factory=dict)
    base_dir: str = "."

    @property
    def noiseless(self):
        return self.noise is None

    def snr_points(self):
        """``(snr, signal)`` pairs; the signal is rescaled to each SNR."""
        if self.noiseless:
            return [(None, self.signal)]
        e2 = self.noise.second_moment()
        s2 = self.signal.second_moment()
        if not self.snr_grid:
            return [(s2 / e2, self.signal)]
        return [(float(snr), self.signal.scaled(np.sqrt(snr * e2 / s2)))
                for snr in self.snr_grid]


def _procedure(spec):
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"bad procedure entry {spec!r}")
    name = str(spec["name"]).lower()
    if name not in PROCEDURES:
        raise ConfigError(f"unknown procedure {name!r}; expected one of {PROCEDURES}")
    if name == "custom" and not (spec.get("rho") and spec.get("sigma")):
        raise ConfigError("custom procedure needs 'rho' and 'sigma' function files")
    return Procedure(name, str(spec.get("label", name)), spec.get("rho"), spec.get("sigma"))


def _grid(v, name):
    if v is None:
        return None
    if isinstance(v, (int, float)):
        v = [v]
    try:
        arr = [float(a) for a in v]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of numbers") from exc
    if not arr:
        raise ConfigError(f"{name} must not be empty")
    return arr


def _dist(spec, name):
    if spec is None:
        return None
    try:
        return ScalarDistribution.from_spec(spec)
    except HidimError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def load_config(doc, base_dir="."):
    """Validate a configuration document (dict or path) into a :class:`SweepConfig`."""
    if isinstance(doc, (str, os.PathLike)):
        base_dir = os.path.dirname(os.path.abspath(doc))
        try:
            with open(doc) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {doc}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "signal" not in doc:
        raise ConfigError("config needs a 'signal' distribution")
    noise = _dist(doc.get("noise"), "noise")
    signal = _dist(doc["signal"], "signal")
    alphas = _grid(doc.get("alpha_grid", doc.get("alpha")), "alpha_grid")
    if alphas is None:
        raise ConfigError("config needs an 'alpha_grid'")
    if any(a <= 0 for a in alphas):
        raise ConfigError("alpha values must be positive")
    snrs = _grid(doc.get("snr_grid"), "snr_grid")
    if snrs and any(s <= 0 for s in snrs):
        raise ConfigError("snr values must be positive")
    procs = doc.get("procedures", ["optimal"])
    if not isinstance(procs, list) or not procs:
        raise ConfigError("procedures must be a nonempty list")
    procedures = [_procedure(p) for p in procs]
    mc = doc.get("mc", {})
    trials = int(mc.get("trials", 20))
    if trials < 1:
        raise ConfigError("mc.trials must be at least 1")
    out = doc.get("output", {})
    cfg = SweepConfig(noise, signal, alphas, snrs, procedures,
                      sqrt_NP=float(mc.get("sqrt_NP", 250)), trials=trials,
                      base_seed=int(mc.get("base_seed", 0)),
                      test_rows=int(mc.get("test_rows", 2000)),
                      solver=dict(doc.get("solver", {})), workers=int(doc.get("workers", 1)),
                      output_dir=str(out.get("dir", ".")),
                      output_format=str(out.get("format", "csv")),
                      source=doc, base_dir=base_dir)
    for p in procedures:
        if p.name == "custom":
            for path in (p.rho_path, p.sigma_path):
                _load_function(path, cfg.base_dir)
    if cfg.noiseless and any(p.name not in ("optimal", "map", "quadratic", "custom")
                             for p in procedures):
        raise ConfigError("noiseless sweeps support the optimal, map, quadratic and "
                          "custom procedures")
    return cfg


def _load_function(path, base_dir, key=None):
    full = path if os.path.isabs(path) else os.path.join(base_dir, path)
    try:
        with open(full) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read function file {full}: {exc}") from exc
    if isinstance(doc, list):
        doc = doc[0]
    if key and key in doc:
        doc = doc[key]
    elif "knots" not in doc and "tag" not in doc:
        for k in ("rho_opt", "sigma_opt"):
            if k in doc and (key is None or key == k):
                doc = doc[k]
                break
    if isinstance(doc, str):
        raise ConfigError(f"{full} holds the marker {doc!r}, not a function")
    try:
        return TabulatedConvexFunction.from_dict(doc)
    except HidimError as exc:
        raise ConfigError(f"{full}: {exc}") from exc


# ------------------------------------------------------------------ procedures
def build_procedure(proc: Procedure, noise, signal, alpha, base_dir="."):
    """``(rho, sigma, extra)`` for a procedure at one grid point.

    ``extra`` holds analytic theory where it is available without
    solving the mean-field equations (the optimal procedures).
    """
    zero = TabulatedConvexFunction.zero()
    extra = {}
    if noise is None:
        if proc.name == "optimal":
            q_s, q_d = noiseless_qopt(signal, alpha)
            sigma = optimal_loss(signal, q_d) if q_d > 0 else zero
            extra["theory"] = {"q_s": q_s, "q_eps": 0.0, "e_train": 0.0, "e_gen": q_s}
            extra["order"] = {"q_s": q_s, "q_d": q_d}
            extra["bound"] = noiseless_bound(signal, alpha)
            return None, sigma, extra
        if proc.name == "map":
            return None, signal.energy_function(), extra
        if proc.name == "quadratic":
            return None, TabulatedConvexFunction.quadratic(1.0), extra
        return None, _load_function(proc.sigma_path, base_dir, "sigma_opt"), extra
    name = proc.name
    if name == "ml":
        return noise.energy_function(), zero, extra
    if name == "map":
        return noise.energy_function(), signal.energy_function(), extra
    if name == "quadratic":
        return TabulatedConvexFunction.quadratic(1.0), zero, extra
    if name == "quadratic_optimal":
        gamma = noise.second_moment() / signal.second_moment()
        return TabulatedConvexFunction.quadratic(1.0), TabulatedConvexFunction.quadratic(gamma), extra
    if name == "optimal":
        q_s, q_d = solve_qopt_regularized(noise, signal, alpha)
        rho, sigma = build_optimal_pair(noise, signal, alpha, (q_s, q_d))
        q_eps, e_train, e_gen = optimal_train_gen(noise, signal, alpha, q_s)
        extra["theory"] = {"q_s": q_s, "q_eps": q_eps, "e_train": e_train, "e_gen": e_gen}
        extra["order"] = {"q_s": q_s, "q_d": q_d, "lambda_rho": q_s, "lambda_sigma": q_d}
        return rho, sigma, extra
    if name == "optimal_unregularized":
        return build_rho_opt_unregularized(noise, alpha), zero, extra
    return (_load_function(proc.rho_path, base_dir, "rho_opt"),
            _load_function(proc.sigma_path, base_dir, "sigma_opt"), extra)


def theory_cell(proc, noise, signal, alpha, rho, sigma, extra):
    """Theory metrics, order parameters and the q_s lower bound of one cell."""
    if "theory" in extra:
        theory, order = dict(extra["theory"]), dict(extra["order"])
        order.update(converged=True)
    else:
        problem = MFTProblem(alpha, noise, signal, rho, sigma)
        # quadratic/quadratic cells start at their closed form
        params = solve_rs_equations(problem, initial=quadratic_order_parameters(problem))
        perf = predict_performance(problem, params)
        theory = {m: float(getattr(perf, m)) for m in METRICS}
        order = params.to_dict()
    if "bound" in extra:
        bound = extra["bound"]
    elif proc.name in UNREGULARIZED:
        bound = unregularized_bound(noise, alpha)
    else:
        bound = high_dim_lower_bound(noise, signal, alpha, theory["q_s"])
    return theory, order, float(bound)


def _solver_options(cfg):
    keys = SolverOptions.__dataclass_fields__
    return SolverOptions(**{k: v for k, v in cfg.solver.items() if k in keys})


def run_trial(rho, sigma, noise, signal, alpha, cfg, index):
    seed = trial_seed(cfg.base_seed, index)
    inst = generate_instance(alpha, cfg.sqrt_NP, noise, signal, seed, cfg.test_rows)
    if noise is None:
        _, m, _ = solve_noiseless_constrained(inst, sigma)
    else:
        opts = _solver_options(cfg)
        opts.record_objective = False
        _, m, _ = solve_m_estimation(inst, rho, sigma, opts)
    rec = {"trial": index, "seed": [cfg.base_seed, index], "N": inst.N, "P": inst.P,
           "iterations": m.solver_iterations, "residual": m.solver_residual}
    rec.update(m.as_dict())
    return rec


def _run_cell(args):
    cfg, proc, alpha, snr, signal = args
    cell = {"procedure": proc.label, "alpha": float(alpha), "snr": snr,
            "theory": None, "bound": None, "order_parameters": None,
            "mc": None, "trials": 0, "converged": False, "records": [], "error": None}
    try:
        rho, sigma, extra = build_procedure(proc, cfg.noise, signal, alpha, cfg.base_dir)
        if cfg.noiseless and "theory" not in extra:
            theory, order, bound = None, None, None
        else:
            theory, order, bound = theory_cell(proc, cfg.noise, signal, alpha, rho, sigma, extra)
        cell.update(theory=theory, order_parameters=order, bound=bound,
                    converged=bool(order["converged"]) if order else False)
        records = [run_trial(rho, sigma, cfg.noise, signal, alpha, cfg, i)
                   for i in range(cfg.trials)] if cfg.trials else []
        cell["records"] = records
        cell["trials"] = len(records)
        cell["mc"] = summarize(records)
    except (HidimError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("cell %s alpha=%g snr=%s failed: %s", proc.label, alpha, snr, exc)
        cell["error"] = f"{type(exc).__name__}: {exc}"
    return cell


def summarize(records):
    out = {}
    for m in METRICS:
        vals = np.array([r[m] for r in records if r.get(m) is not None], dtype=float)
        if vals.size == 0:
            continue
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out[m] = {"mean": float(vals.mean()), "std": std}
    return out


# -------------------------------------------------------------------- tables
@dataclass
class ResultTable:
    cells: list
    provenance: dict

    def to_dict(self):
        return {"provenance": self.provenance, "cells": self.cells}

    @classmethod
    def from_dict(cls, d):
        return cls(list(d.get("cells", [])), dict(d.get("provenance", {})))

    def __eq__(self, other):
        if not isinstance(other, ResultTable):
            return NotImplemented
        strip = lambda p: {k: v for k, v in p.items() if k != "timestamp"}
        return self.cells == other.cells and strip(self.provenance) == strip(other.provenance)

    @property
    def failed(self):
        return [c for c in self.cells if c.get("error")]


def config_hash(doc):
    """Digest of the configuration, ignoring keys that do not change results."""
    doc = {k: v for k, v in doc.items() if k not in ("workers", "output")}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def run_sweep(cfg: SweepConfig) -> ResultTable:
    """Theory and Monte Carlo for every (alpha, snr, procedure) cell.

    A failing cell records its error and the sweep continues.
    """
    if not cfg.procedures:
        raise ConfigError("no procedures requested")
    jobs = [(cfg, proc, alpha, snr, signal)
            for alpha in cfg.alpha_grid
            for snr, signal in cfg.snr_points()
            for proc in cfg.procedures]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(j) for j in jobs]
    prov = {"build_id": f"hidim-{__version__}", "config_hash": config_hash(cfg.source),
            "base_seed": cfg.base_seed, "sqrt_NP": cfg.sqrt_NP, "trials": cfg.trials,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    return ResultTable(cells, prov)


def theory_only(cfg: SweepConfig):
    """One row of mean-field order parameters and predictions per cell."""
    rows = []
    for alpha in cfg.alpha_grid:
        for snr, signal in cfg.snr_points():
            for proc in cfg.procedures:
                row = {"procedure": proc.label, "alpha": alpha, "snr": snr}
                try:
                    rho, sigma, extra = build_procedure(proc, cfg.noise, signal, alpha,
                                                        cfg.base_dir)
                    theory, order, _ = theory_cell(proc, cfg.noise, signal, alpha, rho,
                                                   sigma, extra)
                    row.update({k: order.get(k) for k in ("q_s", "q_d", "lambda_rho",
                                                          "lambda_sigma")})
                    row.update({k: theory[k] for k in ("q_eps", "e_train", "e_gen")})
                    row.update(converged=order.get("converged", True),
                               iterations=order.get("iterations", 0),
                               residual=order.get("residual", 0.0), error=None)
                except (HidimError, ArithmeticError, ValueError) as exc:
                    row.update(converged=False, error=f"{type(exc).__name__}: {exc}")
                rows.append(row)
    return rows


# ---------------------------------------------------------------- comparison
def compare_theory_mc(table: ResultTable, z_max=3.0, bound_rtol=1e-9):
    """z-scores of Monte Carlo means against theory, and bound checks.

    Returns a list of dicts, one per (cell, metric) with both a theory value
    and a Monte Carlo mean, followed by one bound entry per cell that has a
    bound. ``flag`` is true when ``|z| > z_max`` or the bound is violated.
    """
    report = []
    for c in table.cells:
        theory, mc, n = c.get("theory") or {}, c.get("mc") or {}, c.get("trials", 0)
        key = {"procedure": c["procedure"], "alpha": c["alpha"], "snr": c["snr"]}
        for m in METRICS:
            if m not in theory or m not in mc or theory[m] is None or n < 2:
                continue
            se = mc[m]["std"] / np.sqrt(n)
            diff = mc[m]["mean"] - theory[m]
            z = diff / se if se > 0 else (0.0 if diff == 0 else float(np.sign(diff) * np.inf))
            report.append(dict(key, check="z", metric=m, theory=theory[m],
                               mc_mean=mc[m]["mean"], se=float(se), z=float(z),
                               flag=bool(abs(z) > z_max)))
        if c.get("bound") is not None and "q_s" in theory:
            ok = theory["q_s"] >= c["bound"] * (1.0 - bound_rtol)
            report.append(dict(key, check="bound", metric="q_s", theory=theory["q_s"],
                               bound=c["bound"], flag=not ok))
    return report


# -------------------------------------------------------------------- output
def table_rows(table: ResultTable):
    rows = []
    for c in table.cells:
        theory, mc = c.get("theory") or {}, c.get("mc") or {}
        for m in METRICS:
            rows.append({
                "procedure": c["procedure"], "alpha": c["alpha"], "snr": c["snr"], "metric": m,
                "theory": theory.get(m), "bound": c.get("bound") if m == "q_s" else None,
                "mc_mean": mc.get(m, {}).get("mean"), "mc_std": mc.get(m, {}).get("std"),
                "trials": c.get("trials", 0), "converged": c.get("converged", False)})
    return rows


def write_csv(path, rows, columns):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
            w.writeheader()
            for r in rows:
                w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_json(path, doc):
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit(table: ResultTable, out_dir, fmt="csv", stem="results"):
    """Write ``results.csv`` (one row per cell and metric) or ``results.json``."""
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "csv":
        return [write_csv(os.path.join(out_dir, f"{stem}.csv"), table_rows(table), CSV_COLUMNS)]
    if fmt == "json":
        return [write_json(os.path.join(out_dir, f"{stem}.json"), table.to_dict())]
    raise ConfigError(f"unknown output format {fmt!r}")


def read_table(path):
    with open(path) as fh:
        return ResultTable.from_dict(json.load(fh))
