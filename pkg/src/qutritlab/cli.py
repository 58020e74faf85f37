"""Command-line interface.

Every output carries the package version, the seed and the effective
configuration, and re-running with ``--config <report.json>`` regenerates
the same bytes. Exit codes: 0 success, 2 usage, 3 I/O, 4 optimizer did
not reach the known optimum. Violation verdicts never change the exit code.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__, kernels
from .inequalities import classical_kcbs_bound, classical_wright_bound
from .lab import NoiseModel, ShotPlan, fit_leakage, run_experiment

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NOT_CONVERGED = 4

EXPERIMENTS = ("wright", "kcbs", "photonic-verify", "bounds", "optimize")
FORMATS = ("json", "csv", "text")

DEFAULTS = {
    "experiment": "kcbs",
    "visibility": 1.0,
    "leakage": 0.0,
    "leakage_fit": False,
    "drift": 0.0,
    "shots": 30_000,
    "samples": 10,
    "seed": 0,
    "order": "forward",
    "format": "json",
    "output": None,
    "target": "both",
    "dimension": 3,
    "budget": 64,
    "max_evals": 5000,
    "workers": 1,
}

# Reported experimental values with their sources.
TABLE_I = {
    "P(+1|Q0)": (0.4600, 0.012),
    "P(+1|Q1)": (0.4544, 0.012),
    "P(+1|Q2)": (0.4603, 0.016),
    "P(+1|Q3)": (0.4610, 0.011),
    "P(+1|Q4)": (0.4566, 0.010),
    "W": (2.292, 0.028),
}
TABLE_II = {
    "forward": {
        "<Q0Q1>": (-0.712, 0.002),
        "<Q1Q2>": (-0.706, 0.002),
        "<Q2Q3>": (-0.704, 0.002),
        "<Q3Q4>": (-0.708, 0.002),
        "<Q4Q0>": (-0.706, 0.002),
        "kappa": (-3.536, 0.005),
    },
    "reverse": {
        "<Q1Q0>": (-0.785, 0.003),
        "<Q2Q1>": (-0.781, 0.003),
        "<Q3Q2>": (-0.774, 0.003),
        "<Q4Q3>": (-0.774, 0.003),
        "<Q0Q4>": (-0.782, 0.003),
        "kappa": (-3.896, 0.006),
    },
}
# Visibility grids used to simulate each reported column.
TABLE_I_VISIBILITIES = (0.80, 0.85, 0.90)
TABLE_II_VISIBILITIES = {"forward": (0.80,), "reverse": (0.87, 0.90)}


class UsageError(Exception):
    pass


class OutputError(Exception):
    pass


# --- configuration ----------------------------------------------------------

def _add_run_options(p):
    p.add_argument("--config", help="JSON config file, or an earlier report to regenerate")
    p.add_argument("--visibility", type=float, help="interference visibility in [0, 1]")
    p.add_argument("--leakage", type=float, help="exclusivity leakage angle in radians")
    p.add_argument("--leakage-fit", dest="leakage_fit", action="store_const", const=True,
                   help="use the leakage fitted to W = 2.292 over V in [0.8, 0.9]")
    p.add_argument("--drift", type=float, help="per-sample angular jitter in radians")
    p.add_argument("--shots", type=int, help="detected photons per setting")
    p.add_argument("--samples", type=int, help="measurement samples (drift redraws)")
    p.add_argument("--seed", type=int)
    p.add_argument("--order", choices=("forward", "reverse", "both"))
    p.add_argument("--target", choices=("wright", "kcbs", "both"), help="optimizer target")
    p.add_argument("--dimension", type=int, help="optimizer Hilbert-space dimension")
    p.add_argument("--budget", type=int, help="optimizer restarts")
    p.add_argument("--max-evals", dest="max_evals", type=int, help="evaluations per restart")
    p.add_argument("--workers", type=int, help="threads")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--output", "-o", help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qutritlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qutritlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="classical bounds by exhaustive enumeration")
    p.add_argument("--json", action="store_true")
    p.add_argument("--output", "-o")

    p = sub.add_parser("run", help="run an experiment and write a report")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    _add_run_options(p)

    p = sub.add_parser("photonic-verify", help="fidelity table of the five optical devices")
    _add_run_options(p)

    p = sub.add_parser("optimize", help="numerical search for the largest violation")
    _add_run_options(p)

    p = sub.add_parser("tables", help="reported values next to simulated bands")
    p.add_argument("--which", choices=("I", "II"), required=True)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--report", nargs="+",
                   help="run reports to compare instead of simulating inline")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shots", type=int, default=DEFAULTS["shots"])
    p.add_argument("--samples", type=int, default=DEFAULTS["samples"])
    p.add_argument("--output", "-o")
    return parser


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def effective_config(args, preset=None) -> dict:
    """Defaults, then the config file, then explicit flags."""
    config = dict(DEFAULTS)
    if args.config:
        loaded = _read_json(args.config)
        if isinstance(loaded, dict) and "config" in loaded:
            loaded = loaded["config"]
        if not isinstance(loaded, dict):
            raise UsageError(f"{args.config} must hold a JSON object")
        loaded = dict(loaded)
        loaded.pop("output", None)
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        config.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    if preset:
        config["experiment"] = preset
    validate(config)
    return config


def validate(config: dict) -> None:
    if config["experiment"] not in EXPERIMENTS:
        raise UsageError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    vis = config["visibility"]
    vis_list = vis if isinstance(vis, list) else [vis]
    if isinstance(vis, list) and len(vis) != 5:
        raise UsageError("visibility must be one number or a list of five")
    if any(not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0 for v in vis_list):
        raise UsageError("visibility must lie in [0, 1]")
    if config["leakage"] < 0:
        raise UsageError("leakage must be nonnegative")
    if config["drift"] < 0:
        raise UsageError("drift must be nonnegative")
    for key in ("shots", "samples", "budget", "max_evals", "workers"):
        if not isinstance(config[key], int) or config[key] < 1:
            raise UsageError(f"{key.replace('_', '-')} must be a positive integer")
    if not isinstance(config["seed"], int) or not 0 <= config["seed"] < 2 ** 64:
        raise UsageError("seed must be an integer in [0, 2**64)")
    if config["dimension"] < 3:
        raise UsageError("dimension must be at least 3")
    if config["order"] not in ("forward", "reverse", "both"):
        raise UsageError("order must be forward, reverse or both")
    if config["target"] not in ("wright", "kcbs", "both"):
        raise UsageError("target must be wright, kcbs or both")
    if config["format"] not in FORMATS:
        raise UsageError(f"format must be one of {', '.join(FORMATS)}")


# --- output -----------------------------------------------------------------

def _stamp(config=None, seed=None) -> dict:
    head = {"version": __version__, "kernel_backend": kernels.BACKEND}
    if seed is not None:
        head["seed"] = seed
    if config is not None:
        head["seed"] = config["seed"]
    return head


def _comment_header(payload) -> str:
    head = payload["qutritlab"]
    lines = [f"# qutritlab {head['version']} seed={head.get('seed', 'n/a')} backend={head['kernel_backend']}"]
    if "config" in payload:
        lines.append("# config " + json.dumps(payload["config"], sort_keys=True))
    return "\n".join(lines) + "\n"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x, digits=6):
    return f"{x:.{digits}f}"


def write_output(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc


# --- commands ---------------------------------------------------------------

def bounds_payload() -> dict:
    return {
        "qutritlab": _stamp(),
        "wright": classical_wright_bound().to_json(),
        "kcbs": classical_kcbs_bound().to_json(),
    }


def render_bounds(payload, fmt) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2) + "\n"
    w, k = payload["wright"], payload["kcbs"]
    if fmt == "csv":
        rows = [("wright", w["bound_value"], " ".join(map(str, w["attaining_assignment"])),
                 w["search_space_size"], len(w["all_attaining"])),
                ("kcbs", k["bound_value"], " ".join(map(str, k["attaining_assignment"])),
                 k["search_space_size"], len(k["all_attaining"]))]
        return _comment_header(payload) + _csv(
            rows, ["inequality", "bound", "attaining_assignment", "search_space_size", "n_attaining"])
    return _comment_header(payload) + (
        f"Wright bound (max yes answers, exclusive): {w['bound_value']}\n"
        f"  attained by {tuple(w['attaining_assignment'])} ({w['description']}),"
        f" {len(w['all_attaining'])} of {w['search_space_size']} assignments attain it\n"
        f"KCBS bound (min sum of edge products): {k['bound_value']}\n"
        f"  attained by {tuple(k['attaining_assignment'])} ({k['description']}),"
        f" {len(k['all_attaining'])} of {k['search_space_size']} assignments attain it\n")


def _noise(config, leakage):
    vis = config["visibility"]
    return NoiseModel(tuple(vis) if isinstance(vis, list) else vis, leakage, config["drift"])


def experiment_payload(config) -> dict:
    """Report for wright or kcbs runs."""
    leakage = config["leakage"]
    fit = None
    if config["leakage_fit"]:
        fit = fit_leakage()
        leakage = fit.leakage
    plan = ShotPlan(config["shots"], config["seed"], config["samples"])
    orders = ("forward", "reverse") if config["order"] == "both" else (config["order"],)
    report = run_experiment(config["experiment"], noise=_noise(config, leakage), plan=plan,
                            orders=orders, workers=config["workers"])
    body = report.to_json()
    if fit is not None:
        body["leakage_fit"] = {"leakage": fit.leakage, "target_w": fit.target,
                               "visibilities": list(fit.visibilities)}
    body["notes"].append("Table I and Table II calibrations are treated as independent noise draws")
    if config["experiment"] == "wright":
        value, sigma = TABLE_I["W"]
        body["reference"] = {"quantity": "W", "value": value, "sigma": sigma, "source": "Table I"}
    else:
        body["reference"] = [
            {"quantity": "kappa", "order": o, "value": TABLE_II[o]["kappa"][0],
             "sigma": TABLE_II[o]["kappa"][1], "source": f"Table II ({o})"} for o in orders]
    return {"qutritlab": _stamp(config), "config": config, "report": body}


def render_experiment(payload, fmt) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2) + "\n"
    body = payload["report"]
    if fmt == "csv":
        rows = []
        for r in body["results"]:
            c = r["counts"]
            pooled = np.asarray(c["counts"]).sum(axis=0)
            for k, setting in enumerate(c["settings"]):
                for m, outcome in enumerate(c["outcomes"]):
                    rows.append((setting, outcome, int(pooled[k, m])))
        return _comment_header(payload) + _csv(rows, ["setting", "outcome", "count"])
    out = [_comment_header(payload)]
    name = "W" if body["experiment"] == "wright" else "kappa"
    for r in body["results"]:
        tot = r["total"]
        out.append(f"[{r['order']}] {body['experiment']} ({body['source']} source)\n")
        for label, est in zip(r["counts"]["settings"], r["settings"]):
            out.append(f"  {label:8s} {_fmt(est['value'], 4)} ± {_fmt(est['sigma'], 4)}\n")
        out.append(f"  {name:8s} {_fmt(tot['value'], 4)} ± {_fmt(tot['sigma'], 4)}"
                   f"  (analytic {_fmt(r['expected'], 4)}, {tot['method']})\n")
        verdict = "violated" if r["violation"] else "not violated"
        out.append(f"  classical bound {body['classical_bound']}: {verdict},"
                   f" {r['significance']:.1f} sigma\n")
    refs = body["reference"] if isinstance(body["reference"], list) else [body["reference"]]
    for ref in refs:
        out.append(f"reported {ref['quantity']}: {ref['value']} ± {ref['sigma']} ({ref['source']})\n")
    if "leakage_fit" in body:
        out.append(f"fitted leakage: {body['leakage_fit']['leakage']:.6g} rad\n")
    return "".join(out)


def photonic_payload(config) -> dict:
    from .photonic import INTERNAL_HWP_DEG, INTERNAL_QWP_DEG, solve_internal_settings
    from .photonic import fidelity_table

    solved = solve_internal_settings()
    rows = [{"question": i, "theta_deg": theta, "fidelity": fid,
             "passed": fid >= 1 - 1e-6} for i, theta, fid in fidelity_table()]
    return {
        "qutritlab": _stamp(config),
        "config": config,
        "report": {
            "devices": rows,
            "internal_qwp_deg": INTERNAL_QWP_DEG,
            "internal_hwp_deg": INTERNAL_HWP_DEG,
            "solved_internal_deg": list(solved.angles_deg),
            "solved_worst_fidelity": solved.worst_fidelity,
        },
    }


def render_photonic(payload, fmt) -> str:
    body = payload["report"]
    if fmt == "json":
        return json.dumps(payload, indent=2) + "\n"
    if fmt == "csv":
        rows = [(r["question"], r["theta_deg"], repr(r["fidelity"]), r["passed"])
                for r in body["devices"]]
        return _comment_header(payload) + _csv(rows, ["question", "theta_deg", "fidelity", "passed"])
    out = [_comment_header(payload), "question  theta(deg)  fidelity\n"]
    for r in body["devices"]:
        out.append(f"Q{r['question']}        {r['theta_deg']:7.1f}    {r['fidelity']:.15f}\n")
    out.append(f"internal QWP {body['internal_qwp_deg']:.10f} deg,"
               f" HWP {body['internal_hwp_deg']:.10f} deg\n")
    return "".join(out)


def optimize_payload(config) -> dict:
    from .optimize import maximize_violation

    targets = ("wright", "kcbs") if config["target"] == "both" else (config["target"],)
    results = [maximize_violation(t, config["dimension"], config["seed"], config["budget"],
                                  config["max_evals"], workers=config["workers"]).to_json()
               for t in targets]
    return {"qutritlab": _stamp(config), "config": config, "report": {"results": results}}


def render_optimize(payload, fmt) -> str:
    results = payload["report"]["results"]
    if fmt == "json":
        return json.dumps(payload, indent=2) + "\n"
    if fmt == "csv":
        rows = [(r["target"], r["dimension"], repr(r["best_value"]), repr(r["residual"]),
                 r["converged"], r["iterations"], r["seed"]) for r in results]
        return _comment_header(payload) + _csv(
            rows, ["target", "dimension", "best_value", "residual", "converged", "evaluations", "seed"])
    out = [_comment_header(payload)]
    for r in results:
        out.append(f"{r['target']:6s} d={r['dimension']} best={r['best_value']:.12f}"
                   f" residual={r['residual']:.2e} converged={r['converged']}"
                   f" evaluations={r['iterations']}\n")
    return "".join(out)


# --- tables -----------------------------------------------------------------

def _band(values):
    return [float(min(values)), float(max(values))]


def _simulate_table(which, seed, shots, samples):
    """Simulated values per reported quantity, one run per visibility on the grid.

    Grid point ``k`` uses seed ``seed + k``.
    """
    sims = {}
    if which == "I":
        fit = fit_leakage()
        for k, v in enumerate(TABLE_I_VISIBILITIES):
            plan = ShotPlan(shots, seed + k, samples)
            r = run_experiment("wright", noise=NoiseModel(v, fit.leakage), plan=plan).result()
            for label, est in zip(TABLE_I, r.settings + [r.total]):
                sims.setdefault(label, []).append(est.value)
        model = f"V in {list(TABLE_I_VISIBILITIES)}, fitted leakage {fit.leakage:.6g} rad"
        return {"": (sims, model)}
    out = {}
    for order in ("forward", "reverse"):
        col = {}
        for k, v in enumerate(TABLE_II_VISIBILITIES[order]):
            plan = ShotPlan(shots, seed + k, samples)
            r = run_experiment("kcbs", noise=NoiseModel(v), plan=plan, orders=(order,)).result(order)
            for label, est in zip(TABLE_II[order], r.settings + [r.total]):
                col.setdefault(label, []).append(est.value)
        out[order] = (col, f"V in {list(TABLE_II_VISIBILITIES[order])}, no leakage")
    return out


def _sims_from_reports(which, paths):
    reports = [_read_json(p) for p in paths]
    sims = {}
    for rep in reports:
        body = rep.get("report", {})
        want = "wright" if which == "I" else "kcbs"
        if body.get("experiment") != want:
            raise UsageError(f"table {which} needs {want} reports")
        for r in body["results"]:
            key = "" if which == "I" else r["order"]
            labels = list(TABLE_I) if which == "I" else list(TABLE_II[r["order"]])
            col, _ = sims.setdefault(key, ({}, "from reports"))
            for label, est in zip(labels, r["settings"] + [r["total"]]):
                col.setdefault(label, []).append(est["value"])
    return sims


def tables_rows(which, sims):
    rows = []
    if which == "I":
        col, model = sims[""]
        for label, (value, sigma) in TABLE_I.items():
            rows.append((label, value, sigma, "Table I", *_band(col[label]), model))
        return rows
    for order in ("forward", "reverse"):
        if order not in sims:
            continue
        col, model = sims[order]
        for label, (value, sigma) in TABLE_II[order].items():
            rows.append((label, value, sigma, f"Table II ({order})", *_band(col[label]), model))
    return rows


def render_tables(which, rows, head, fmt) -> str:
    header = f"# qutritlab {head['version']} seed={head['seed']} backend={head['kernel_backend']}\n"
    if fmt == "csv":
        return header + _csv(rows, ["quantity", "reported", "reported_sigma", "provenance",
                                    "simulated_low", "simulated_high", "model"])
    out = [header]
    for label, value, sigma, prov, lo, hi, model in rows:
        out.append(f"{label}: reported {value} ± {sigma} ({prov}) |"
                   f" simulated band [{lo:.4f}, {hi:.4f}] ({model})\n")
    return "".join(out)


# --- entry point ------------------------------------------------------------

RUNNERS = {
    "wright": (experiment_payload, render_experiment),
    "kcbs": (experiment_payload, render_experiment),
    "photonic-verify": (photonic_payload, render_photonic),
    "optimize": (optimize_payload, render_optimize),
}


def _run(args, preset=None) -> int:
    config = effective_config(args, preset)
    # the destination is not part of the report
    output = config.pop("output")
    if config["experiment"] == "bounds":
        payload = bounds_payload()
        payload["qutritlab"]["seed"] = config["seed"]
        payload["config"] = config
        write_output(render_bounds(payload, config["format"]), output)
        return EXIT_OK
    build, render = RUNNERS[config["experiment"]]
    payload = build(config)
    write_output(render(payload, config["format"]), output)
    if config["experiment"] == "optimize":
        if not all(r["converged"] for r in payload["report"]["results"]):
            return EXIT_NOT_CONVERGED
    return EXIT_OK


def _tables(args) -> int:
    if args.shots < 1 or args.samples < 1:
        raise UsageError("shots and samples must be positive")
    if args.report:
        sims = _sims_from_reports(args.which, args.report)
    else:
        sims = _simulate_table(args.which, args.seed, args.shots, args.samples)
    rows = tables_rows(args.which, sims)
    if not rows:
        raise UsageError("the reports hold no results for this table")
    write_output(render_tables(args.which, rows, _stamp(seed=args.seed), args.format), args.output)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "bounds":
            payload = bounds_payload()
            write_output(render_bounds(payload, "json" if args.json else "text"), args.output)
            return EXIT_OK
        if args.command == "run":
            return _run(args)
        if args.command in ("photonic-verify", "optimize"):
            return _run(args, preset=args.command)
        if args.command == "tables":
            return _tables(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qutritlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OutputError as exc:
        print(f"qutritlab: error: {exc}", file=sys.stderr)
        if args.command == "tables" and getattr(args, "report", None):
            print("generate reports first, e.g. `qutritlab run --experiment kcbs --order both"
                  " --visibility 0.8 --output run.json`", file=sys.stderr)
        return EXIT_IO
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
