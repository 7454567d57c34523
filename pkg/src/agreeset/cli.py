"""Command-line entry point: ``agreeset <command>`` or ``python -m agreeset``.

Exit codes: 0 success, 2 configuration error, 3 partial certification (some
verifier budget ran out), 4 input/output error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .arith import TrainConfig, ensemble_predict, errors_on, make_rng, train_pool
from .attack import AttackConfig, Variant, attack_pdt, ensemble_variance_rank, sample_pdt
from .bounds import Box, BoxError
from .distance import DistanceSpec, InputDomain, PdtResult, Status, iter_pairs, pdt, preset_domain
from .net import ParseError, load, save
from .select import (
    Criterion,
    PdtTable,
    SelectionConfig,
    SelectionReport,
    cluster_pdt_analysis,
    run_selection,
)
from .verify import Budget, OutputConstraint, Query, VerifierUnknown, decide

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_IO = 0, 2, 3, 4
JOBS_ENV = "AGREESET_JOBS"

log = logging.getLogger("agreeset")


class ConfigError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(obj, out: str | None) -> None:
    text = _dump(obj)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv(path: Path, rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    path.write_text(buf.getvalue())


def _envelope(command: str, config: dict, payload: dict) -> dict:
    return {"tool": "agreeset", "version": __version__, "command": command,
            "config": config, **payload}


def _domain(spec: str) -> InputDomain:
    if spec.startswith("preset:"):
        return preset_domain(spec.split(":", 1)[1])
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"domain file not found: {spec}")
    return InputDomain.load(path)


def _models(paths: Sequence[str]):
    missing = [p for p in paths if not Path(p).exists()]
    if missing:
        raise ConfigError(f"model file(s) not found: {', '.join(missing)}")
    return [load(p) for p in paths]


def _budget(args) -> Budget:
    return Budget(max_nodes=args.budget_nodes, max_seconds=args.budget_secs)


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer") from None


def _range(text: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in text.split(","))
    return lo, hi


def _seeds(text: str) -> list[int]:
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def _attack_cfg(args) -> AttackConfig:
    return AttackConfig(
        variant=args.variant, T=args.T, T_x=args.T_x, T_lambda=args.T_lambda,
        eps_x=args.eps_x, eps_lambda=args.eps_lambda, use_sign=not args.raw_gradient,
        restarts=args.restarts, seed=args.seed,
    )


def _selection_cfg(args, eps: float | None = None) -> SelectionConfig:
    delta = args.delta if args.delta is not None else (eps if eps is not None else 1.0)
    return SelectionConfig(Criterion(args.criterion), args.percentile, args.iterations,
                           delta, args.min_survivors)


# ---------------------------------------------------------- table files


def table_document(names, results: dict, config: dict, method: str = "verified") -> dict:
    """PDT table artifact; ``results`` maps (i, j) to a dict with lower/upper/status."""
    k = len(names)
    entries = [[None] * k for _ in range(k)]
    for i in range(k):
        entries[i][i] = {"lower": 0.0, "upper": 0.0, "status": Status.CERTIFIED.value}
    for (i, j), r in results.items():
        entries[i][j] = entries[j][i] = r
    return _envelope("pdt-table", config, {"method": method, "names": list(names), "entries": entries})


def table_from_document(doc: dict) -> PdtTable:
    if doc.get("tool") != "agreeset" or "entries" not in doc:
        raise ParseError("not an agreeset PDT table document")
    entries = doc["entries"]
    values = np.array([[e["upper"] for e in row] for row in entries], dtype=np.float64)
    status = [[e["status"] for e in row] for row in entries]
    return PdtTable(values, status, doc.get("names"))


def read_table(path: str) -> PdtTable:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"table file not found: {path}")
    if p.suffix.lower() == ".csv":
        rows = list(csv.reader(p.read_text().splitlines()))
        names = rows[0][1:] if rows and rows[0] and rows[0][0] == "" else None
        body = rows[1:] if names is not None else rows
        values = [[float(v) for v in (r[1:] if names is not None else r)] for r in body if r]
        return PdtTable(np.array(values), names=names)
    return table_from_document(json.loads(p.read_text()))


def selection_rows(report: SelectionReport, names: Sequence[str]) -> list[list]:
    rows = report.csv_rows()
    for r in rows[1:]:
        r[5] = " ".join(names[int(m)] for m in r[5].split()) if r[5] else ""
    return rows


# -------------------------------------------------------------- PDT jobs


def _pdt_job(payload):
    paths, domain_json, kind, M, eps, nodes, secs = payload
    n1, n2 = load(paths[0]), load(paths[1])
    r = pdt(n1, n2, InputDomain.from_json(domain_json), DistanceSpec.parse(kind), M, eps,
            Budget(nodes, secs))
    return {"lower": r.lower, "upper": r.upper, "status": r.status.value, "queries": r.queries}


def _attack_job(payload):
    paths, domain_json, kind, cfg = payload
    n1, n2 = load(paths[0]), load(paths[1])
    e = attack_pdt(n1, n2, InputDomain.from_json(domain_json), DistanceSpec.parse(kind),
                   AttackConfig(**cfg))
    return {"lower": e.value, "upper": e.value, "status": "Estimate", "failed": e.failed}


def _sample_job(payload):
    paths, domain_json, kind, n, seed = payload
    n1, n2 = load(paths[0]), load(paths[1])
    e = sample_pdt(n1, n2, InputDomain.from_json(domain_json), DistanceSpec.parse(kind), n, seed)
    return {"lower": e.value, "upper": e.value, "status": "Estimate", "failed": e.failed}


def _map(fn, payloads, jobs: int) -> list:
    if jobs <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, payloads))


def _pair_payloads(args, domain, k):
    pairs = list(iter_pairs(k))
    d = domain.to_json()
    return pairs, [((args.models[i], args.models[j]), d, args.distance, args.max, args.eps,
                    args.budget_nodes, args.budget_secs) for i, j in pairs]


def _names(paths) -> list[str]:
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [f"{i}:{s}" for i, s in enumerate(stems)]


# -------------------------------------------------------------- commands


def _verify_inputs(args):
    """(boxes, constraint) from ``--query`` JSON or from ``--domain`` plus ``--row``."""
    if args.query:
        obj = json.loads(Path(args.query).read_text())
        boxes = [Box.from_json(obj["box"])] if "box" in obj else list(InputDomain.from_json(obj).boxes)
        return boxes, OutputConstraint.from_json(obj["constraint"])
    if not (args.domain and args.row):
        raise ConfigError("verify needs --query, or --domain with at least one --row")
    rows = [r.split(":") for r in args.row]
    try:
        coeffs = [[float(v) for v in c.split(",")] for c, _ in rows]
        thresholds = [float(t) for _, t in rows]
    except ValueError:
        raise ConfigError("--row takes COEFFS:THRESHOLD, e.g. 1,-1:30") from None
    return list(_domain(args.domain).boxes), OutputConstraint(coeffs, thresholds, args.strict)


def cmd_verify(args) -> int:
    net = _models([args.model])[0]
    boxes, cons = _verify_inputs(args)
    verdicts, code = [], EXIT_OK
    for box in boxes:
        try:
            v = decide(Query(net, box, cons), _budget(args))
            doc = v.to_json()
            doc["stats"].pop("seconds", None)  # keep the artifact reproducible
            verdicts.append(doc)
            if v.sat:
                break
        except VerifierUnknown as exc:
            verdicts.append({"verdict": "UNKNOWN", "reason": str(exc)})
            code = EXIT_PARTIAL
    sat = any(v["verdict"] == "SAT" for v in verdicts)
    overall = "SAT" if sat else ("UNKNOWN" if code == EXIT_PARTIAL else "UNSAT")
    config = {"model": args.model, "query": args.query, "domain": args.domain,
              "constraint": cons.to_json(),
              "budget_nodes": args.budget_nodes, "budget_secs": args.budget_secs}
    _emit(_envelope("verify", config, {"verdict": overall, "boxes": verdicts}), args.out)
    return EXIT_OK if sat else code


def cmd_pdt(args) -> int:
    n1, n2 = _models(args.models)
    domain = _domain(args.domain)
    r = pdt(n1, n2, domain, DistanceSpec.parse(args.distance), args.max, args.eps, _budget(args))
    config = {"models": args.models, "domain": args.domain, "distance": args.distance,
              "max": args.max, "eps": args.eps, "budget_nodes": args.budget_nodes,
              "budget_secs": args.budget_secs}
    _emit(_envelope("pdt", config, {"result": r.to_json()}), args.out)
    return EXIT_PARTIAL if r.status is Status.UNKNOWN else EXIT_OK


def cmd_select(args) -> int:
    table = read_table(args.table)
    cfg = _selection_cfg(args)
    report = run_selection(table, cfg)
    doc = _envelope("select", {"table": args.table, **cfg.to_json()},
                    {"names": table.names, "report": report.to_json(),
                     "survivor_names": [table.names[i] for i in report.survivors]})
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "selection.json").write_text(_dump(doc))
        _write_csv(out / "iterations.csv", selection_rows(report, table.names))
    else:
        _emit(doc, None)
    return EXIT_OK


def cmd_attack(args) -> int:
    n1, n2 = _models(args.models)
    domain = _domain(args.domain)
    cfg = _attack_cfg(args)
    e = attack_pdt(n1, n2, domain, DistanceSpec.parse(args.distance), cfg)
    config = {"models": args.models, "domain": args.domain, "distance": args.distance,
              **cfg.to_json()}
    _emit(_envelope("attack", config, {"method": e.method, "estimate": e.to_json()}), args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    n1, n2 = _models(args.models)
    domain = _domain(args.domain)
    e = sample_pdt(n1, n2, domain, DistanceSpec.parse(args.distance), args.samples, args.seed)
    config = {"models": args.models, "domain": args.domain, "distance": args.distance,
              "samples": args.samples, "seed": args.seed}
    _emit(_envelope("sample", config, {"method": "sample", "estimate": e.to_json()}), args.out)
    return EXIT_OK


def cmd_train_arith(args) -> int:
    seeds = _seeds(args.seeds)
    hidden = tuple(int(h) for h in args.hidden.split(","))
    cfg = TrainConfig(args.epochs, args.batch_size, args.lr, hidden)
    pool = train_pool(seeds, cfg, args.n_train, args.data_seed, args.dim, _range(args.train_range),
                      _range(args.ood_range), args.n_eval, args.eval_seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [["seed", "file", "in_max", "in_mean", "ood_max", "ood_mean"]]
    for e in pool:
        name = f"arith_s{e.seed}.ffnt"
        save(e.net, out / name)
        rows.append([e.seed, name, e.in_dist.max_abs_error, e.in_dist.mean_abs_error,
                     e.ood.max_abs_error, e.ood.mean_abs_error])
    _write_csv(out / "errors.csv", rows)
    return EXIT_OK


def cmd_ensemble(args) -> int:
    nets = _models(args.models)
    lo, hi = _range(args.range)
    x = make_rng(args.seed).uniform(lo, hi, size=(args.samples, nets[0].input_dim))
    members = [errors_on(lambda a, n=n: n(a), x, "ood").to_json() for n in nets]
    ens = errors_on(lambda a: ensemble_predict(nets, a), x, "ood").to_json()
    payload = {"members": dict(zip(args.models, members)), "ensemble": ens}
    if args.rank is not None:
        domain = Box.cube(nets[0].input_dim, lo, hi)
        ranked = ensemble_variance_rank(nets, args.rank, domain, args.samples, args.seed)
        payload["variance_rank"] = [
            {"members": [args.models[i] for i in r.members], "mean_variance": r.mean_variance}
            for r in ranked[: args.top]
        ]
    config = {"models": args.models, "range": [lo, hi], "samples": args.samples,
              "seed": args.seed, "rank": args.rank}
    _emit(_envelope("ensemble", config, payload), args.out)
    return EXIT_OK


def _pipeline_config(args) -> dict:
    return {"models": list(args.models), "domain": args.domain, "distance": args.distance,
            "max": args.max, "eps": args.eps, "budget_nodes": args.budget_nodes,
            "budget_secs": args.budget_secs, "selection": _selection_cfg(args, args.eps).to_json()}


def _check_pipeline(args):
    if len(args.models) < 2:
        raise ConfigError("a pipeline needs at least two models")
    if not args.max > args.eps > 0:
        raise ConfigError("require --max > --eps > 0")
    nets = _models(args.models)
    domain = _domain(args.domain)
    if domain.dim != nets[0].input_dim:
        raise ConfigError("domain dimension does not match the models")
    return nets, domain


def _run_table(args, domain, method="verified"):
    k = len(args.models)
    pairs, payloads = _pair_payloads(args, domain, k)
    if method == "verified":
        results = _map(_pdt_job, payloads, _jobs(args))
    elif method == "attack":
        cfg = _attack_cfg(args).to_json()
        results = _map(_attack_job, [(p[0], p[1], p[2], cfg) for p in payloads], _jobs(args))
    else:
        results = _map(_sample_job, [(p[0], p[1], p[2], args.samples, args.seed) for p in payloads],
                       _jobs(args))
    return dict(zip(pairs, results))


def cmd_pipeline(args) -> int:
    _check_pipeline(args)
    domain = _domain(args.domain)
    names = _names(args.models)
    results = _run_table(args, domain)
    config = _pipeline_config(args)
    doc = table_document(names, results, config)
    table = table_from_document(doc)
    report = run_selection(table, _selection_cfg(args, args.eps))
    partial = sorted(f"{names[i]}/{names[j]}" for (i, j), r in results.items()
                     if r["status"] == Status.UNKNOWN.value)
    sel = _envelope("pipeline", config, {
        "names": names, "report": report.to_json(),
        "survivor_names": [names[i] for i in report.survivors], "uncertified_pairs": partial,
    })
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "pdt_table.json").write_text(_dump(doc))
    (out / "selection.json").write_text(_dump(sel))
    _write_csv(out / "iterations.csv", selection_rows(report, names))
    return EXIT_PARTIAL if partial else EXIT_OK


def classify(verified: dict, estimate: dict, eps: float) -> str:
    if estimate.get("failed"):
        return "FAILED"
    if estimate["lower"] >= verified["lower"] - eps:
        return "ALIGNED"
    return "UNTIGHTENED"


def cmd_compare_backends(args) -> int:
    _check_pipeline(args)
    domain = _domain(args.domain)
    names = _names(args.models)
    config = {**_pipeline_config(args), "attack": _attack_cfg(args).to_json(),
              "samples": args.samples, "seed": args.seed}
    tables, reports = {}, {}
    for method in ("verified", "attack", "sample"):
        results = _run_table(args, domain, method)
        tables[method] = results
        doc = table_document(names, results, config, method)
        reports[method] = run_selection(table_from_document(doc), _selection_cfg(args, args.eps))
    rows = [["pair", "verified_lower", "verified_upper", "status", "attack", "attack_class",
             "sample", "sample_class"]]
    counts = {m: {"ALIGNED": 0, "UNTIGHTENED": 0, "FAILED": 0} for m in ("attack", "sample")}
    for (i, j), v in tables["verified"].items():
        row = [f"{names[i]}/{names[j]}", v["lower"], v["upper"], v["status"]]
        for m in ("attack", "sample"):
            e = tables[m][(i, j)]
            c = classify(v, e, args.eps)
            counts[m][c] += 1
            row += [e["lower"], c]
        rows.append(row)
    same = {m: reports[m].survivors == reports["verified"].survivors for m in ("attack", "sample")}
    doc = _envelope("compare-backends", config, {
        "names": names, "counts": counts, "selection_matches_verified": same,
        "survivors": {m: [names[i] for i in r.survivors] for m, r in reports.items()},
    })
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(_dump(doc))
    _write_csv(out / "compare.csv", rows)
    partial = any(v["status"] == Status.UNKNOWN.value for v in tables["verified"].values())
    return EXIT_PARTIAL if partial else EXIT_OK


def _labels(path: str, names: Sequence[str]) -> list[bool] | None:
    text = Path(path).read_text().strip()
    if not text:
        return None
    obj = json.loads(text)
    if isinstance(obj, dict):
        good = set(obj.get("good", []))
        if not good:
            return None
        return [n in good or str(i) in good or i in good for i, n in enumerate(names)]
    return [bool(v) for v in obj]


def cmd_report(args) -> int:
    table = read_table(args.table)
    names = table.names
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"names": names, "k": table.k}
    if args.selection:
        doc = json.loads(Path(args.selection).read_text())
        if doc.get("tool") != "agreeset" or "report" not in doc:
            raise ParseError(f"{args.selection}: not an agreeset selection document "
                             f"(expected version {__version__})")
        its = doc["report"]["iterations"]
        rows = [["iteration", "survivors", "ds_min", "ds_median", "ds_max"]]
        for n, it in enumerate(its):
            d = np.array(list(it["ds"].values()), dtype=np.float64)
            rows.append([n, len(it["survivors"]), float(d.min()), float(np.median(d)), float(d.max())])
        _write_csv(out / "iterations.csv", rows)
        summary["termination"] = doc["report"]["termination"]
    if args.labels:
        good = _labels(args.labels, names)
        if good is not None:
            c = cluster_pdt_analysis(table, good)
            summary["clusters"] = c.to_json()
            ratio = "" if c.ratio_percent is None else f"{c.ratio_percent:.1f}"
            _write_csv(out / "clusters.csv", [["good_avg", "bad_avg", "ratio_percent"],
                                              [_fmt(c.good_avg), _fmt(c.bad_avg), ratio]])
    (out / "report.json").write_text(_dump(_envelope("report", {"table": args.table}, summary)))
    return EXIT_OK


def _fmt(v):
    return "" if v is None else repr(float(v))


def cmd_oracle(args) -> int:
    from .oracle import exact_max_distance, grid_max_distance

    n1, n2 = _models(args.models)
    domain = _domain(args.domain)
    spec = DistanceSpec.parse(args.distance)
    payload = {"exact": exact_max_distance(n1, n2, domain, spec).to_json()}
    if args.grid is not None:
        payload["grid"] = [grid_max_distance(n1, n2, b, spec, args.grid).to_json()
                           for b in domain.boxes]
    _emit(_envelope("oracle", {"models": args.models, "domain": args.domain,
                               "distance": args.distance, "grid": args.grid}, payload), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_budget(p):
    p.add_argument("--budget-nodes", type=int, default=200_000)
    p.add_argument("--budget-secs", type=float, default=None)


def _add_pdt(p):
    p.add_argument("--domain", required=True, help="domain JSON file or preset:NAME")
    p.add_argument("--distance", choices=["l1", "cdist"], default="l1")
    p.add_argument("--max", type=float, required=True, help="largest distance searched (M)")
    p.add_argument("--eps", type=float, default=1.0, help="search precision")
    _add_budget(p)


def _add_selection(p):
    p.add_argument("--criterion", choices=[c.value for c in Criterion], default="percentile")
    p.add_argument("--percentile", type=float, default=25.0)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--delta", type=float, default=None,
                   help="similarity threshold on DS spread (default: --eps)")
    p.add_argument("--min-survivors", type=int, default=2)


def _add_attack(p):
    p.add_argument("--variant", choices=[v.value for v in Variant], default="pgd")
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--T-x", dest="T_x", type=int, default=20)
    p.add_argument("--T-lambda", dest="T_lambda", type=int, default=20)
    p.add_argument("--eps-x", type=float, default=None)
    p.add_argument("--eps-lambda", type=float, default=1.0)
    p.add_argument("--raw-gradient", action="store_true", help="step along the raw gradient")
    p.add_argument("--restarts", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="agreeset", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"agreeset {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name, fn, help_text, json_out=True):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=None,
                       help=f"worker processes (default: ${JOBS_ENV} or 1)")
        if json_out:
            p.add_argument("--out", default=None, help="write JSON here instead of stdout")
        return p

    p = command("verify", cmd_verify, "decide whether some input satisfies C y >= b")
    p.add_argument("model")
    p.add_argument("--query", default=None, help='JSON {"box": {...}, "constraint": {...}}')
    p.add_argument("--domain", default=None)
    p.add_argument("--row", action="append", default=None, help="COEFFS:THRESHOLD, repeatable")
    p.add_argument("--strict", action="store_true")
    _add_budget(p)

    p = command("pdt", cmd_pdt, "certified PDT bracket for two models")
    p.add_argument("models", nargs=2)
    _add_pdt(p)

    p = command("select", cmd_select, "model selection over a PDT table")
    p.add_argument("table", help="PDT table JSON or CSV")
    _add_selection(p)
    p.add_argument("--out-dir", default=None)

    p = command("attack", cmd_attack, "gradient-attack PDT estimate")
    p.add_argument("models", nargs=2)
    p.add_argument("--domain", required=True)
    p.add_argument("--distance", choices=["l1", "cdist"], default="l1")
    _add_attack(p)

    p = command("sample", cmd_sample, "sampling PDT estimate")
    p.add_argument("models", nargs=2)
    p.add_argument("--domain", required=True)
    p.add_argument("--distance", choices=["l1", "cdist"], default="l1")
    p.add_argument("--samples", type=int, default=1000)

    p = command("train-arith", cmd_train_arith, "train an arithmetic model pool", json_out=False)
    p.add_argument("--seeds", default="0..9", help="e.g. 0..9 or 0,3,5")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--hidden", default="10,10,10")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--n-train", type=int, default=10_000)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--train-range", default="-10,10")
    p.add_argument("--ood-range", default="-1000,1000")
    p.add_argument("--n-eval", type=int, default=10_000)
    p.add_argument("--eval-seed", type=int, default=1)

    p = command("ensemble", cmd_ensemble, "averaging-ensemble errors and variance ranking")
    p.add_argument("models", nargs="+")
    p.add_argument("--range", default="-1000,1000")
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--rank", type=int, default=None, help="rank all subsets of this size")
    p.add_argument("--top", type=int, default=10)

    for name, fn, text in (("pipeline", cmd_pipeline, "PDT table plus model selection"),
                           ("compare-backends", cmd_compare_backends,
                            "verified vs attack vs sampling tables")):
        p = command(name, fn, text)
        p.add_argument("models", nargs="+")
        _add_pdt(p)
        _add_selection(p)
        p.add_argument("--out-dir", required=True)
        if name == "compare-backends":
            _add_attack(p)
            p.add_argument("--samples", type=int, default=1000)

    p = command("report", cmd_report, "summaries from pipeline artifacts")
    p.add_argument("table")
    p.add_argument("--selection", default=None)
    p.add_argument("--labels", default=None, help='JSON {"good": [names]} or list of booleans')
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("oracle", help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_oracle)
    p.add_argument("models", nargs=2)
    p.add_argument("--domain", required=True)
    p.add_argument("--distance", choices=["l1", "cdist"], default="l1")
    p.add_argument("--grid", type=float, default=None, help="also run the grid oracle")
    p.add_argument("--out", default=None)
    # the oracle subcommand stays out of the command list
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "oracle"]
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    # parse errors subclass ValueError, so they are caught first
    except (OSError, ParseError, json.JSONDecodeError) as exc:
        print(f"agreeset: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError, KeyError, BoxError) as exc:
        print(f"agreeset: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
