"""Command-line entry point: ``hidim <command> --config cfg.json --out dir``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import harness
from .classical import (ScalarInferenceSetting, asymptotic_error_unbiased, bayes_asymptotics,
                        bayes_lower_bound, cramer_rao_bound)
from .convex import TabulatedConvexFunction
from .errors import ConfigError, HidimError
from .optimal import build_rho_opt_unregularized, optimal_design, solve_qopt_unregularized
from .quadratic import (QuadSetting, ridge_closed_form, ridge_high_snr_asymptote,
                        ridge_rs_fixed_point, ridge_via_mp_integral)

log = logging.getLogger("hidim")

THEORY_COLUMNS = ("procedure", "alpha", "snr", "q_s", "q_d", "lambda_rho", "lambda_sigma",
                  "q_eps", "e_train", "e_gen", "converged", "iterations", "residual")
QUAD_COLUMNS = ("alpha", "snr", "qbar_closed", "qbar_fixedpoint", "qbar_mp", "qbar_asymptote")
CLASSICAL_COLUMNS = ("n_measurements", "loss", "asymptotic_error", "cramer_rao", "bayes_q_d",
                     "bayes_q_s", "bayes_bound")
TRIAL_COLUMNS = ("procedure", "alpha", "snr", "trial", "N", "P", "q_s", "q_eps", "e_train",
                 "e_gen", "iterations", "residual")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _config(args):
    doc = _read_json(args.config)
    if args.seed is not None:
        doc.setdefault("mc", {})["base_seed"] = args.seed
    return harness.load_config(doc, os.path.dirname(os.path.abspath(args.config)))


def _write(rows, columns, args, stem):
    os.makedirs(args.out, exist_ok=True)
    if args.format == "json":
        path = harness.write_json(os.path.join(args.out, f"{stem}.json"), rows)
    else:
        path = harness.write_csv(os.path.join(args.out, f"{stem}.csv"), rows, columns)
    print(path)


# ------------------------------------------------------------------ commands
def cmd_theory(args):
    rows = harness.theory_only(_config(args))
    _write(rows, THEORY_COLUMNS, args, "theory")
    return 2 if any(r.get("error") for r in rows) else 0


def cmd_optimal_design(args):
    cfg = _config(args)
    docs = []
    failed = False
    for alpha in cfg.alpha_grid:
        for snr, signal in cfg.snr_points():
            try:
                sol = optimal_design(cfg.noise, signal, alpha, noiseless=cfg.noiseless)
                doc = {"alpha": alpha, "snr": snr}
                doc.update(sol.to_dict())
                if not cfg.noiseless and alpha > 1:
                    q = solve_qopt_unregularized(cfg.noise, alpha)
                    doc["unregularized"] = {
                        "q_opt": q, "rho_opt": build_rho_opt_unregularized(cfg.noise, alpha).to_dict()}
            except HidimError as exc:
                failed = True
                doc = {"alpha": alpha, "snr": snr, "error": f"{type(exc).__name__}: {exc}"}
            docs.append(doc)
    os.makedirs(args.out, exist_ok=True)
    path = harness.write_json(os.path.join(args.out, "optimal_design.json"),
                              docs[0] if len(docs) == 1 else docs)
    print(path)
    return 2 if failed else 0


def cmd_quad(args):
    doc = _read_json(args.config)
    alphas = harness._grid(doc.get("alpha_grid", doc.get("alpha")), "alpha_grid")
    snrs = harness._grid(doc.get("snr_grid", doc.get("snr")), "snr_grid")
    if not alphas or not snrs:
        raise ConfigError("quad needs alpha_grid and snr_grid")
    rows = []
    for a in alphas:
        for snr in snrs:
            s = QuadSetting(a, snr)
            rows.append({"alpha": a, "snr": snr, "qbar_closed": ridge_closed_form(s),
                         "qbar_fixedpoint": ridge_rs_fixed_point(s)[1],
                         "qbar_mp": ridge_via_mp_integral(s),
                         "qbar_asymptote": ridge_high_snr_asymptote(s) if snr >= 10 else None})
    _write(rows, QUAD_COLUMNS, args, "quad")
    return 0


def cmd_classical(args):
    doc = _read_json(args.config)
    noise = harness._dist(doc.get("noise"), "noise")
    if noise is None:
        raise ConfigError("classical needs a noise distribution")
    signal = harness._dist(doc.get("signal"), "signal")
    ns = harness._grid(doc.get("n_grid", doc.get("n_measurements", [10])), "n_grid")
    losses = doc.get("losses", ["ml", "quadratic"])
    table = {"ml": noise.energy_function(), "quadratic": TabulatedConvexFunction.quadratic(1.0),
             "absolute": TabulatedConvexFunction.absolute(1.0)}
    rows = []
    failed = False
    for n in ns:
        setting = ScalarInferenceSetting(noise, int(n), signal)
        for name in losses:
            if name not in table:
                raise ConfigError(f"unknown loss {name!r}")
            row = {"n_measurements": int(n), "loss": name}
            try:
                row["asymptotic_error"] = asymptotic_error_unbiased(table[name], setting)
                row["cramer_rao"] = cramer_rao_bound(setting)
                if signal is not None:
                    row["bayes_q_d"], row["bayes_q_s"] = bayes_asymptotics(setting)
                    row["bayes_bound"] = bayes_lower_bound(setting)
            except HidimError as exc:
                failed = True
                log.warning("classical row N=%s loss=%s failed: %s", n, name, exc)
            rows.append(row)
    _write(rows, CLASSICAL_COLUMNS, args, "classical")
    return 2 if failed else 0


def cmd_simulate(args):
    cfg = _config(args)
    rows = []
    failed = False
    for alpha in cfg.alpha_grid:
        for snr, signal in cfg.snr_points():
            for proc in cfg.procedures:
                try:
                    rho, sigma, _ = harness.build_procedure(proc, cfg.noise, signal, alpha,
                                                            cfg.base_dir)
                    for i in range(cfg.trials):
                        rec = harness.run_trial(rho, sigma, cfg.noise, signal, alpha, cfg, i)
                        rec.update(procedure=proc.label, alpha=alpha, snr=snr)
                        rows.append(rec)
                except HidimError as exc:
                    failed = True
                    log.warning("simulate %s alpha=%g failed: %s", proc.label, alpha, exc)
    _write(rows, TRIAL_COLUMNS, args, "trials")
    return 2 if failed else 0


def cmd_sweep(args):
    cfg = _config(args)
    table = harness.run_sweep(cfg)
    fmt = args.format or cfg.output_format
    for p in harness.emit(table, args.out, fmt):
        print(p)
    if fmt != "json":
        harness.emit(table, args.out, "json")
    for c in table.failed:
        log.warning("failed cell %s alpha=%g snr=%s: %s", c["procedure"], c["alpha"],
                    c["snr"], c["error"])
    return 2 if table.failed else 0


def cmd_compare(args):
    doc = _read_json(args.config)
    table = harness.ResultTable.from_dict(doc)
    report = harness.compare_theory_mc(table)
    cols = ("procedure", "alpha", "snr", "check", "metric", "theory", "mc_mean", "se", "z",
            "bound", "flag")
    _write(report, cols, args, "compare")
    flagged = [r for r in report if r["flag"]]
    for r in flagged:
        log.warning("flagged: %s", r)
    return 2 if flagged or table.failed else 0


COMMANDS = {"theory": cmd_theory, "optimal-design": cmd_optimal_design, "quad": cmd_quad,
            "classical": cmd_classical, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "compare": cmd_compare}


def build_parser():
    p = argparse.ArgumentParser(prog="hidim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON configuration (for compare: "
                                                        "a results JSON from sweep)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--format", choices=("csv", "json"), default=None)
        sp.add_argument("--seed", type=int, default=None, help="override mc.base_seed")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.format is None and args.command != "sweep":
        args.format = "csv"
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
