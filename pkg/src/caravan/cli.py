"""Command line front end.

Exit codes: 0 success, 2 a verification failed, 1 usage error.  Every option
can also come from ``--config file.json``; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import bridge, discrete, icrt, limit, parking, samplers, stats
from .model import CaravanInstance, ThetaSequence

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

DEFAULTS = {
    "alpha": None,
    "eps": None,
    "law": None,
    "t": None,
    "replicas": 1000,
    "grid": 2**20,
    "delta": None,
    "seed": None,
    "threads": 1,
    "out": "-",
    "format": None,
    "suite": "lamb",
    "instances": 100,
    "n": None,
    "lam": "0.5,1",
    "r": "0.5,1,2",
    "ranks": 10,
    "threshold": stats.KS_THRESHOLD,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    helps = {
        "alpha": "stable index in (1, 2], comma list where several are allowed",
        "eps": "caravan scale eps (budget 1/eps); comma list for a trend",
        "law": "caravan length law, e.g. pareto:1.5,1 or deterministic:1",
        "t": "time or comma list of times",
        "replicas": "Monte Carlo replicas",
        "grid": "grid size for Brownian paths",
        "delta": "atom truncation threshold",
        "seed": "integer seed (required for random experiments)",
        "threads": "worker threads for replicas",
        "suite": "verification suite: lamb, profile, discrete or all",
        "instances": "number of random instances",
        "n": "lot size, comma list where several are allowed",
        "lam": "Laplace arguments",
        "r": "radii",
        "ranks": "number of largest fragments written per replica",
        "threshold": "KS acceptance threshold",
    }
    kinds = {"replicas": int, "grid": int, "seed": int, "threads": int, "instances": int,
             "ranks": int, "delta": float, "threshold": float}
    for name in names:
        p.add_argument(f"--{name}", type=kinds.get(name, str), default=None, help=helps[name])
    p.add_argument("--out", default=None, help="output path, - for stdout")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--config", default=None, help="JSON file with option values")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="caravan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_common(sub.add_parser("park", help="simulate one parking trajectory"), "law", "eps", "seed")
    _add_common(sub.add_parser("limit", help="fragments of the limit excursion"),
                "law", "t", "replicas", "grid", "delta", "seed", "threads", "ranks")
    _add_common(sub.add_parser("verify", help="exact differential checks"), "suite", "instances", "seed")
    _add_common(sub.add_parser("discrete", help="parking on Z/nZ"), "law", "n", "seed")
    _add_common(sub.add_parser("weibull", help="Weibull identity by Monte Carlo"),
                "alpha", "r", "replicas", "delta", "seed")
    _add_common(sub.add_parser("laplace", help="Laplace identity of the stable sampler"),
                "alpha", "lam", "replicas", "seed")
    _add_common(sub.add_parser("moment", help="size-biased fragment mean: Monte Carlo and quadrature"),
                "alpha", "t", "replicas", "delta", "seed")
    _add_common(sub.add_parser("converge", help="KS of backward parking marginals against the limit"),
                "law", "alpha", "t", "eps", "replicas", "grid", "delta", "seed", "threads", "threshold")
    _add_common(sub.add_parser("extreme", help="KS of permuted equal-mass parking against the Brownian extreme"),
                "n", "t", "replicas", "grid", "seed", "threads", "threshold")
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
    opts = {}
    for key, val in vars(args).items():
        if key in ("config", "command"):
            continue
        if val is None:
            val = cfg.get(key, DEFAULTS.get(key))
        opts[key] = val
    return opts


def _need(opts: dict, *names: str) -> None:
    for name in names:
        if opts.get(name) is None:
            raise UsageError(f"--{name} is required")


def _law(opts: dict) -> samplers.CaravanLaw:
    law = opts["law"]
    if isinstance(law, dict):
        return samplers.CaravanLaw.from_dict(law)
    return samplers.CaravanLaw.parse(law)


def _emit(opts: dict, header, rows, report: dict | None = None, default_format: str = "csv") -> None:
    fmt = opts.get("format") or default_format
    buf = io.StringIO()
    if fmt == "json":
        payload = report if report is not None else {"columns": list(header), "rows": [list(r) for r in rows]}
        json.dump(payload, buf, indent=2, sort_keys=True, default=_json_default)
        buf.write("\n")
    else:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    out = opts.get("out") or "-"
    if out == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(out, "w", newline="") as fh:
            fh.write(buf.getvalue())


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x)}")


def _report(experiment: str, params: dict, ks: list, passed: bool, **extra) -> dict:
    return {"experiment": experiment, "params": params, "ks": ks, "pass": bool(passed), **extra}


# --- subcommands ------------------------------------------------------------


def cmd_park(opts):
    _need(opts, "law", "eps", "seed")
    law = _law(opts)
    eps = _floats(opts["eps"])[0]
    traj = parking.run_parking(samplers.make_instance(law, eps, opts["seed"]))
    rows = list(traj.rows())
    report = _report("park", {"law": law.to_dict(), "eps": eps, "seed": opts["seed"]}, [], True,
                     rows=[list(r) for r in rows])
    _emit(opts, ("step", "block_rank", "block_start", "block_length"), rows, report)
    return EXIT_OK


def cmd_limit(opts):
    _need(opts, "law", "t", "seed")
    law = _law(opts)
    ts = _floats(opts["t"])
    alpha = law.index
    delta = opts["delta"] if opts["delta"] is not None else (stats.limit_delta(law) if alpha < 2 else None)

    def one(k):
        path = limit.scaled_limit_bridge(alpha, samplers.derive_seed(opts["seed"], 1, k), mu1=law.mu1,
                                         mu2=law.mu2, c=law.tail_constant, grid=opts["grid"], delta=delta)
        return limit.fragmentations(path, [law.mu1 * t for t in ts])

    frags = stats.run_replicas(one, opts["replicas"], opts["threads"])
    rows = [(k, t, rank, float(m))
            for k, per_t in enumerate(frags)
            for t, f in zip(ts, per_t)
            for rank, m in enumerate(f[: opts["ranks"]], start=1)]
    _emit(opts, ("replica", "t", "rank", "mass"), rows)
    return EXIT_OK


def cmd_verify(opts):
    _need(opts, "seed")
    suite = opts["suite"]
    if suite not in ("lamb", "profile", "discrete", "all"):
        raise UsageError(f"unknown suite {suite!r}")
    checks = []
    if suite in ("lamb", "profile", "all"):
        for k, inst in enumerate(samplers.differential_suite(opts["instances"], opts["seed"])):
            if suite in ("lamb", "all"):
                r = bridge.lamb_check(inst)
                checks.append({"suite": "lamb", "instance": k, "value": r.max_discrepancy, "pass": r.passed})
            if suite in ("profile", "all"):
                w = parking.check_profile_invariants(inst)
                v = max(w.values())
                checks.append({"suite": "profile", "instance": k, "value": v, "pass": v <= 1e-12})
    if suite in ("discrete", "all"):
        laws = [samplers.CaravanLaw("deterministic"), samplers.CaravanLaw("geometric", q=0.3)]
        for k in range(opts["instances"]):
            for n in (10, 100):
                r = discrete.discrete_continuous_equiv(n, laws[k % 2], samplers.derive_seed(opts["seed"], n, k))
                checks.append({"suite": "discrete", "instance": k, "n": n, "value": r.max_discrepancy,
                               "pass": r.passed})
    passed = all(c["pass"] for c in checks)
    report = _report("verify", {"suite": suite, "instances": opts["instances"], "seed": opts["seed"]}, [],
                     passed, checks=checks, max_discrepancy=max((c["value"] for c in checks), default=0.0))
    rows = [(c["suite"], c["instance"], c["value"], c["pass"]) for c in checks]
    _emit(opts, ("suite", "instance", "value", "pass"), rows, report, default_format="json")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_discrete(opts):
    _need(opts, "law", "n", "seed")
    law = _law(opts)
    n = int(_floats(opts["n"])[0])
    traj = discrete.knuth_park(n, discrete.discrete_instance(n, law, opts["seed"]))
    rows = list(traj.rows())
    _emit(opts, ("step", "block_rank", "block_size"), rows)
    return EXIT_OK


def _three_se(rows) -> bool:
    return all(abs(est - target) <= 3 * se for *_, est, se, target in rows)


def cmd_weibull(opts):
    _need(opts, "alpha", "seed")
    radii = _floats(opts["r"])
    delta = opts["delta"] if opts["delta"] is not None else 0.01
    rows = []
    for a in _floats(opts["alpha"]):
        mean, se = icrt.weibull_identity_mc(a, radii, opts["replicas"], samplers.derive_seed(opts["seed"], 0),
                                            delta)
        rows += [(a, r, float(m), float(s), icrt.weibull_survival(a, r)) for r, m, s in zip(radii, mean, se)]
    passed = _three_se(rows)
    report = _report("weibull", {"alpha": _floats(opts["alpha"]), "r": radii, "replicas": opts["replicas"],
                                 "delta": delta}, [], passed, rows=[list(r) for r in rows])
    _emit(opts, ("alpha", "r", "mc_estimate", "mc_se", "closed_form"), rows, report)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_laplace(opts):
    _need(opts, "alpha", "seed")
    lams = _floats(opts["lam"])
    rows = []
    for a in _floats(opts["alpha"]):
        x = samplers.stable_spectrally_positive(a, opts["replicas"], opts["seed"])
        for lam in lams:
            m, se = stats.mc_mean_se(np.exp(-lam * x))
            rows.append((a, lam, m, se, math.exp(lam**a)))
    passed = _three_se(rows)
    report = _report("laplace", {"alpha": _floats(opts["alpha"]), "lam": lams, "replicas": opts["replicas"]},
                     [], passed, rows=[list(r) for r in rows])
    _emit(opts, ("alpha", "lam", "mc_estimate", "mc_se", "target"), rows, report)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_moment(opts):
    _need(opts, "alpha", "t")
    ts = _floats(opts["t"])
    if opts["seed"] is None and any(t != 0 for t in ts):
        raise UsageError("--seed is required")
    delta = opts["delta"] if opts["delta"] is not None else 0.01
    rows = []
    for a in _floats(opts["alpha"]):
        for t in ts:
            seed = opts["seed"] if t == 0 else samplers.derive_seed(opts["seed"], 0)
            est, se = icrt.size_biased_moment_mc(a, t, opts["replicas"], seed, delta)
            rows.append((a, t, est, se, icrt.size_biased_moment_quadrature(a, t)))
    passed = all(abs(e - q) <= 3 * s if s > 0 else e == q for _, _, e, s, q in rows)
    report = _report("moment", {"alpha": _floats(opts["alpha"]), "t": ts, "replicas": opts["replicas"]}, [],
                     passed, rows=[list(r) for r in rows])
    _emit(opts, ("alpha", "t", "mc_estimate", "mc_se", "quadrature"), rows, report)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_converge(opts):
    _need(opts, "law", "t", "eps", "seed")
    law = _law(opts)
    alpha = _floats(opts["alpha"])[0] if opts["alpha"] is not None else law.index
    eps_list = _floats(opts["eps"])
    reports = stats.convergence_trend(law, alpha, _floats(opts["t"]), eps_list, opts["replicas"], opts["seed"],
                                      grid=opts["grid"], delta=opts["delta"], threads=opts["threads"],
                                      threshold=opts["threshold"])
    if len(reports) == 1:
        report = reports[0]
    else:
        # the last eps must meet the threshold and rank-1 KS must fall along the eps list
        trend = stats.trend_by_t(reports)
        passed = reports[-1]["pass"] and all(v["decreasing"] for v in trend.values())
        report = _report("convergence_trend", {"eps": eps_list},
                         [dict(e, eps=r["params"]["eps"]) for r in reports for e in r["ks"]], passed,
                         reports=reports, trend=[{"t": t, **v} for t, v in trend.items()])
    rows = [(e.get("eps", eps_list[0]), e["t"], e["rank"], e["value"]) for e in report["ks"]]
    _emit(opts, ("eps", "t", "rank", "ks"), rows, report, default_format="json")
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_extreme(opts):
    _need(opts, "n", "t", "seed")
    sizes = [int(x) for x in _floats(opts["n"])]
    family = [np.full(n, 1.0 / n) for n in sizes]
    report = stats.extreme_convergence_experiment(family, ThetaSequence(1.0, []), _floats(opts["t"])[0],
                                                  opts["replicas"], opts["seed"], grid=opts["grid"],
                                                  threads=opts["threads"], threshold=opts["threshold"])
    rows = [(e["n"], e["t"], e["rank"], e["value"]) for e in report["ks"]]
    _emit(opts, ("n", "t", "rank", "ks"), rows, report, default_format="json")
    return EXIT_OK if report["pass"] else EXIT_FAIL


COMMANDS = {
    "park": cmd_park, "limit": cmd_limit, "verify": cmd_verify, "discrete": cmd_discrete,
    "weibull": cmd_weibull, "laplace": cmd_laplace, "moment": cmd_moment,
    "converge": cmd_converge, "extreme": cmd_extreme,
}


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = _resolve(args)
        return COMMANDS[args.command](opts)
    except (UsageError, ValueError, OSError) as exc:
        print(f"caravan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)
