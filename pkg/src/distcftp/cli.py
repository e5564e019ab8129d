"""Command line front end.

Every option may also come from a JSON file given with ``--config``; flags
given explicitly win over the file. The seed falls back to ``EXC_SEED``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Sequence

from . import chain, models, verify
from .cftp import cftp_sample_batch, monotone_batch
from .cftp.report import DEFAULT_MAX_STAGES
from .csp import CspError, InstanceTooLarge, enumerate_distribution, is_valid, load_csp_json
from .graph import GraphError, generate, parse_graph_spec, read_graph_file, write_graph_file
from .simnet import CONGEST, LOCAL, NetworkMode

ENUM_SAMPLE_LIMIT = 1 << 16
# below this many samples per state the empirical TV is dominated by noise
TV_SAMPLES_PER_STATE = 100

DEFAULTS = {
    "graph": "path:n=2",
    "graph_file": None,
    "graph_seed": 0,
    "model": "hardcore:lambda=1",
    "csp_file": None,
    "p": None,
    "seed": None,
    "mode": CONGEST,
    "budget": None,
    "samples": None,
    "max_stages": DEFAULT_MAX_STAGES,
    "backend": "auto",
    "format": "json",
    "output": None,
    "steps": 10,
    "init": None,
    "sizes": None,
    "family": "cycle",
    "seeds_per_size": 20,
    "soundness_seeds": 100,
    "t_max": 16,
    "tv_tol": 0.03,
    "corrupt_rule": False,
}

SAMPLE_COUNTS = {"sample": 1, "verify": 10_000}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="distcftp", description="Distributed exact sampling for local CSPs.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, instance=True):
        p.add_argument("--config", help="JSON file of option values")
        p.add_argument("--seed", type=int)
        p.add_argument("--output", help="write here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"))
        if instance:
            p.add_argument("--graph", help="family:key=val,... (path, cycle, grid, random_regular, erdos_renyi)")
            p.add_argument("--graph-file")
            p.add_argument("--graph-seed", type=int)
            p.add_argument("--model", help="hardcore:lambda=0.3 | wds:lambda=8 | ising:beta=2")
            p.add_argument("--csp-file", help="JSON CSP description, used instead of --model")
            p.add_argument("--p", type=float, help="marking probability")

    def sampling(p):
        p.add_argument("--mode", choices=(LOCAL, CONGEST))
        p.add_argument("--budget", type=int, help="CONGEST bits per message")
        p.add_argument("--samples", type=int)
        p.add_argument("--max-stages", type=int)
        p.add_argument("--backend", choices=("auto", "fast", "simnet"))

    p = sub.add_parser("sample", help="draw exact samples")
    common(p)
    sampling(p)

    p = sub.add_parser("verify", help="run the exactness checks on one instance")
    common(p)
    sampling(p)
    p.add_argument("--soundness-seeds", type=int)
    p.add_argument("--t-max", type=int)
    p.add_argument("--tv-tol", type=float)
    p.add_argument("--corrupt-rule", action="store_true", default=None, help="use a deliberately broken bounding rule")

    p = sub.add_parser("bench", help="round scaling over graph sizes")
    common(p)
    sampling(p)
    p.add_argument("--family", choices=("path", "cycle", "grid", "random_regular", "erdos_renyi"))
    p.add_argument("--sizes", help="comma separated, increasing")
    p.add_argument("--seeds-per-size", type=int)

    p = sub.add_parser("chain-run", help="run the forward chain for debugging")
    common(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--init", help="comma separated starting label indices")

    p = sub.add_parser("gen-graph", help="write a generated graph in edge-list format")
    common(p, instance=False)
    p.add_argument("--graph")
    p.add_argument("--graph-seed", type=int)
    return ap


def _config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        for k, v in doc.items():
            key = k.replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"unknown config key {k!r}")
            cfg[key] = v
    for k, v in vars(args).items():
        if k in cfg and v is not None:
            cfg[k] = v
    if cfg["seed"] is None:
        env = os.environ.get("EXC_SEED")
        try:
            cfg["seed"] = int(env) if env not in (None, "") else 0
        except ValueError:
            raise UsageError(f"EXC_SEED must be an integer, got {env!r}") from None
    if cfg["samples"] is None:
        cfg["samples"] = SAMPLE_COUNTS.get(args.command, 1)
    if cfg["samples"] < 0:
        raise UsageError("--samples must be nonnegative")
    if cfg["max_stages"] < 1:
        raise UsageError("--max-stages must be at least 1")
    return cfg


def _graph(cfg):
    if cfg["graph_file"]:
        return read_graph_file(cfg["graph_file"])
    family, params = parse_graph_spec(cfg["graph"])
    return generate(family, params, cfg["graph_seed"])


def _instance(cfg):
    g = _graph(cfg)
    if cfg["csp_file"]:
        with open(cfg["csp_file"]) as fh:
            csp = load_csp_json(fh.read(), g)
        return g, csp, None
    name, params = models.parse_model_spec(cfg["model"])
    return g, models.build_model(name, g, params), name


def _p(cfg, csp) -> float:
    p = models.default_p(csp.model) if cfg["p"] is None else cfg["p"]
    if not 0.0 < p <= 1.0:
        raise UsageError(f"--p must lie in (0, 1], got {p}")
    return p


def _net(cfg) -> NetworkMode:
    return NetworkMode(cfg["mode"], cfg["budget"])


def _draw(cfg, g, csp, seeds):
    p = _p(cfg, csp)
    if csp.model == "ising":
        return monotone_batch(g, csp.params["beta"], seeds, p, cfg["max_stages"], _net(cfg), cfg["backend"])
    return cftp_sample_batch(csp, g, seeds, p, cfg["max_stages"], _net(cfg), cfg["backend"])


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), default=str)


def _oracle(csp):
    if csp.n_labels**csp.n > ENUM_SAMPLE_LIMIT:
        return None
    return verify.labeled_distribution(csp, enumerate_distribution(csp))


def _key(lab) -> str:
    return ",".join(str(x) for x in lab)


def cmd_sample(cfg, out) -> int:
    g, csp, _ = _instance(cfg)
    seeds = range(cfg["seed"], cfg["seed"] + cfg["samples"])
    reps = _draw(cfg, g, csp, seeds) if cfg["samples"] else []
    aborted = sum(not r.exact for r in reps)
    if cfg["format"] == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["seed", "status", "stages_used", "T_star", "total_rounds", "peak_bits", "budget_violations", "labeling"])
        for r in reps:
            lab = "" if r.labeling is None else " ".join(map(str, r.labeling))
            w.writerow([r.seed, r.status, r.stages_used, r.T_star, r.total_rounds, r.peak_message_bits, r.budget_violations, lab])
    else:
        for r in reps:
            out.write(_dumps(r.to_dict()) + "\n")
    summary = {"samples": len(reps), "exact": len(reps) - aborted, "aborted": aborted}
    if aborted:
        summary["warning"] = "aborted runs are not samples and are excluded from every statistic"
        print(f"warning: {aborted} aborted run(s) excluded", file=sys.stderr)
    counts = verify.empirical_counts(reps)
    pi = _oracle(csp) if counts else None
    if pi is not None:
        summary["empirical"] = {_key(k): counts[k] / sum(counts.values()) for k in sorted(pi)}
        summary["target"] = {_key(k): float(pi[k]) for k in sorted(pi)}
        summary["tv"] = verify.tv_distance(counts, pi)
    if cfg["format"] == "json":
        out.write(_dumps({"summary": summary}) + "\n")
    return 0


def cmd_verify(cfg, out) -> int:
    g, csp, _ = _instance(cfg)
    p = _p(cfg, csp)
    checks = []

    def record(name, ok, **info):
        checks.append({"check": name, "status": "skipped" if ok is None else ("pass" if ok else "fail"), **info})

    try:
        pi_idx = enumerate_distribution(csp)
    except InstanceTooLarge as exc:
        pi_idx = None
        record("oracle", None, reason=str(exc))
    if pi_idx is not None:
        try:
            M = verify.build_transition_matrix(csp, g, p)
            db = verify.check_detailed_balance(M, pi_idx)
            st = verify.check_stationarity(M, pi_idx)
            record("detailed_balance", db <= 1e-12, value=db)
            record("stationarity", st <= 1e-12, value=st)
        except InstanceTooLarge as exc:
            record("detailed_balance", None, reason=str(exc))
            record("stationarity", None, reason=str(exc))
        try:
            step = verify.broken_bounded_step if cfg["corrupt_rule"] else None
            res = verify.bounding_soundness_bruteforce(csp, g, p, range(cfg["soundness_seeds"]), cfg["t_max"], step)
            record("bounding_soundness", res.ok, checked=res.checked, witness=res.witness)
        except InstanceTooLarge as exc:
            record("bounding_soundness", None, reason=str(exc))
    if cfg["samples"] and pi_idx is not None:
        seeds = range(cfg["seed"], cfg["seed"] + cfg["samples"])
        reps = _draw(cfg, g, csp, seeds)
        counts = verify.empirical_counts(reps)
        pi = verify.labeled_distribution(csp, pi_idx)
        aborted = sum(not r.exact for r in reps)
        record("no_aborted_runs", aborted == 0, aborted=aborted)
        if counts:
            tv = verify.tv_distance(counts, pi)
            if len(pi) * TV_SAMPLES_PER_STATE > sum(counts.values()):
                record("tv_distance", None, value=tv, reason=f"{len(pi)} states are too many for {sum(counts.values())} samples")
            else:
                record("tv_distance", tv <= cfg["tv_tol"], value=tv, tol=cfg["tv_tol"])
            try:
                stat, pv = verify.chi_square(counts, pi)
                record("chi_square", pv >= 1e-3, statistic=stat, p_value=pv)
            except ValueError as exc:
                record("chi_square", None, reason=str(exc))
        record("congest_budget", all(r.budget_violations == 0 for r in reps))
    elif cfg["samples"]:
        record("sampling", None, reason="no oracle distribution for this instance")
    failed = any(c["status"] == "fail" for c in checks)
    if cfg["format"] == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["check", "status"])
        for c in checks:
            w.writerow([c["check"], c["status"]])
    else:
        out.write(_dumps({"checks": checks, "ok": not failed}) + "\n")
    return 1 if failed else 0


def cmd_bench(cfg, out) -> int:
    sizes_text = cfg["sizes"]
    if isinstance(sizes_text, list):
        sizes = [int(x) for x in sizes_text]
    else:
        sizes = [int(x) for x in str(sizes_text or "").split(",") if x.strip()]
    if not sizes:
        raise UsageError("--sizes needs at least one size")
    name, params = models.parse_model_spec(cfg["model"])
    rep = verify.scaling_experiment(
        name,
        params,
        cfg["family"],
        sizes,
        cfg["seeds_per_size"],
        cfg["p"],
        cfg["max_stages"],
        cfg["seed"],
        backend=cfg["backend"],
    )
    if cfg["format"] == "csv":
        rep.write_runs_csv(out)
    else:
        doc = rep.to_dict()
        doc["certification"] = [
            {"n": n, "seed": r.seed, "congest_ok": r.budget_violations == 0, "peak_bits": r.peak_message_bits}
            for n, r in rep.runs
        ]
        out.write(_dumps(doc) + "\n")
    return 0


def _first_valid(csp):
    # depth-first over labels in support order; stops at the first hit
    n, nl = csp.n, csp.n_labels
    closing = [[] for _ in range(n)]
    for c in csp.constraints:
        closing[c.members[-1]].append(c)
    ell = [0] * n
    stack = [(0, list(csp.support[0]))] if n else []
    while stack:
        v, opts = stack[-1]
        if not opts:
            stack.pop()
            continue
        ell[v] = opts.pop(0)
        if all(c.table[c.index([ell[m] for m in c.members], nl)] > 0 for c in closing[v]):
            if v + 1 == n:
                return tuple(ell)
            stack.append((v + 1, list(csp.support[v + 1])))
    if n == 0:
        return ()
    raise CspError("instance has no valid labeling")


def cmd_chain_run(cfg, out) -> int:
    g, csp, _ = _instance(cfg)
    p = _p(cfg, csp)
    if cfg["steps"] < 0:
        raise UsageError("--steps must be nonnegative")
    if cfg["init"]:
        x0 = tuple(int(x) for x in str(cfg["init"]).split(","))
        if len(x0) != csp.n or not all(0 <= x < csp.n_labels for x in x0):
            raise UsageError("--init must give one label index per vertex")
        if not is_valid(csp, g, x0):
            raise UsageError("--init is not a valid labeling")
    else:
        x0 = _first_valid(csp)
    x = chain.run_forward(csp, g, x0, cfg["seed"], p, cfg["steps"])
    doc = {"seed": cfg["seed"], "steps": cfg["steps"], "p": p, "start": csp.label_names(x0), "end": csp.label_names(x)}
    out.write(_dumps(doc) + "\n")
    return 0


def cmd_gen_graph(cfg, out) -> int:
    family, params = parse_graph_spec(cfg["graph"])
    write_graph_file(generate(family, params, cfg["graph_seed"]), out)
    return 0


COMMANDS = {
    "sample": cmd_sample,
    "verify": cmd_verify,
    "bench": cmd_bench,
    "chain-run": cmd_chain_run,
    "gen-graph": cmd_gen_graph,
}


def main(argv: Sequence[str] | None = None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    buf = io.StringIO()
    try:
        cfg = _config(args)
        code = COMMANDS[args.command](cfg, buf)
    except (UsageError, GraphError, CspError, models.ModelError, ValueError, OSError) as exc:
        print(f"distcftp {args.command}: error: {exc}", file=sys.stderr)
        return 2
    text = buf.getvalue()
    if cfg["output"]:
        with open(cfg["output"], "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
