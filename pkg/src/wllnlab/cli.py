"""Command-line front end.

Subcommands: tails, extract, verify, hereditary, demo, rerun.  Every run
writes ``manifest.json`` echoing the full resolved configuration (defaults
included) plus the master seed; ``rerun --manifest`` replays it and must
reproduce byte-identical CSV/JSON artifacts.

Exit codes: 0 success, 2 expected-condition mismatch, 3 extraction failure,
4 verification violation, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import correctors as corr
from . import tails as tails_mod
from .extract import ExtractionFailure, ExtractionPlan, greedy_extract, verify_plan
from .models import SequenceModel, model_from_spec
from .verify import (
    PATTERNS,
    hereditary_suite,
    truncation_gap_probe,
    wlln_probe,
)

EXIT_OK = 0
EXIT_EXPECT = 2
EXIT_EXTRACT = 3
EXIT_VIOLATION = 4
EXIT_USAGE = 64

SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


# -------------------------------------------------------------------------
# deterministic serialization
# -------------------------------------------------------------------------

def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _cell(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


# -------------------------------------------------------------------------
# configuration
# -------------------------------------------------------------------------

_DEFAULTS = {
    "tails": {
        "model": None, "seed": 0,
        "m_grid": [2, 4, 8, 16, 32, 64, 128, 256],
        "n_range": [1, 32],
        "feller_grid": [],
        "expect": {},
    },
    "extract": {
        "model": None, "seed": 0,
        "target_length": 64,
        "n_grid": [64, 256, 1024, 4096],
        "corrector": "zero",
        "mode": "exact",
        "eps_floor": None,
        "search_cap": None,
        "min_index": 1,
        "sample_R": 400,
    },
    "verify": {
        "model": None, "seed": 0,
        "indices": None,          # explicit list; default 1..max(n_grid)
        "plan_path": None,        # or take indices from a stored plan
        "epsilon": 0.25,
        "n_grid": [64, 256, 1024, 4096],
        "reps": 2000,
        "corrector": "zero",
        "pass_threshold": 0.05,
        "compute_l2": False,
        "gap_probe": False,
    },
    "hereditary": {
        "model": None, "seed": 0,
        "indices": None,
        "plan_path": None,
        "epsilon": 0.25,
        "n_grid": [64, 256, 1024],
        "reps": 500,
        "corrector": "zero",
        "pass_threshold": 0.05,
        "patterns": list(PATTERNS),
    },
    "demo": {
        "name": None, "seed": 0, "reps": 2000,
    },
}


def resolve_config(command: str, file_cfg: dict, overrides: dict) -> dict:
    cfg = dict(_DEFAULTS[command])
    incoming = dict(file_cfg)
    incoming.pop("schema_version", None)
    for key, val in incoming.items():
        if key not in cfg:
            raise UsageError(f"unknown config key {key!r} for {command}")
        cfg[key] = val
    for key, val in overrides.items():
        if val is None:
            continue
        if key not in cfg:
            raise UsageError(f"flag --{key} not applicable to {command}")
        cfg[key] = val
    cfg["schema_version"] = SCHEMA_VERSION
    return cfg


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _require_model(cfg: dict) -> SequenceModel:
    if not cfg.get("model"):
        raise UsageError("a model spec is required (config key 'model')")
    try:
        return model_from_spec(cfg["model"])
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed model spec: {exc}")


def build_corrector(name: str, model: SequenceModel, n_grid) -> corr.CorrectorSeries:
    if name == "zero":
        return corr.zero_corrector(n_grid)
    if name == "weak_l2":
        return corr.corrector_weak_l2(model, n_grid)
    if name == "iid":
        if not hasattr(model, "dist"):
            raise UsageError("corrector 'iid' needs an iid model")
        return corr.corrector_iid(model.dist, n_grid)
    if name == "independent":
        return corr.corrector_independent(model, n_grid)
    raise UsageError(f"unknown corrector {name!r}")


def _out_dir(args) -> str:
    out = args.out or os.environ.get("WLLNLAB_OUT")
    if not out:
        raise UsageError("no output directory (--out or WLLNLAB_OUT)")
    os.makedirs(out, exist_ok=True)
    return out


def write_manifest(out: str, command: str, cfg: dict) -> None:
    # the output directory itself is deliberately NOT part of the manifest,
    # so a rerun into a fresh directory reproduces it byte for byte
    write_json(os.path.join(out, "manifest.json"),
               {"schema_version": SCHEMA_VERSION, "command": command,
                "master_seed": cfg["seed"], "config": cfg})


# -------------------------------------------------------------------------
# subcommands
# -------------------------------------------------------------------------

def _verdict_json(v: tails_mod.Verdict) -> dict:
    return {"status": v.status, "witness": v.witness,
            "data": _jsonable(v.data)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return obj.item()
    return obj


def cmd_tails(cfg: dict, out: str) -> int:
    model = _require_model(cfg)
    m_grid = [float(M) for M in cfg["m_grid"]]
    if not m_grid:
        raise UsageError("m_grid must be non-empty")
    lo, hi = (int(v) for v in cfg["n_range"])
    if lo < 1 or hi < lo:
        raise UsageError("n_range must be [lo, hi] with 1 <= lo <= hi")
    n_range = range(lo, hi + 1)

    profile = tails_mod.build_tail_profile(model, m_grid, n_range)
    write_csv(os.path.join(out, "tails.csv"),
              ("n", "M", "tau", "sigma", "feller_residual"), profile.rows())

    verdicts = {
        "weak_l1": tails_mod.check_weak_l1(profile, model),
        "liminf": tails_mod.check_liminf_condition(profile, model),
        "limsup": tails_mod.check_limsup_condition(profile, model),
        "energy": tails_mod.check_energy_vanishing(model, m_grid, n_range),
    }
    block = {name: _verdict_json(v) for name, v in verdicts.items()}
    if cfg["feller_grid"]:
        first, second = tails_mod.check_feller_necessary(model, cfg["feller_grid"])
        block["feller_tail_sum"] = _verdict_json(first)
        block["feller_square_sum"] = _verdict_json(second)
    write_json(os.path.join(out, "verdicts.json"), block)

    for cond, wanted in sorted(dict(cfg["expect"]).items()):
        if cond not in block:
            raise UsageError(f"--expect names unknown condition {cond!r}")
        got = block[cond]["status"]
        ok = got == wanted or (wanted == "holds" and got == "holds-on-grid")
        if not ok:
            print(f"expectation failed: {cond} is {got!r}, expected {wanted!r}")
            return EXIT_EXPECT
    return EXIT_OK


def cmd_extract(cfg: dict, out: str) -> int:
    model = _require_model(cfg)
    n_grid = [int(N) for N in cfg["n_grid"]]
    D = build_corrector(cfg["corrector"], model, n_grid)
    try:
        plan = greedy_extract(
            model, int(cfg["target_length"]), n_grid, D,
            mode=cfg["mode"], eps_floor=cfg["eps_floor"],
            search_cap=cfg["search_cap"], seed=int(cfg["seed"]),
            R=int(cfg["sample_R"]), min_index=int(cfg["min_index"]))
    except ExtractionFailure as exc:
        write_json(os.path.join(out, "extract_failure.json"), {
            "step": exc.step, "epsilon": exc.eps, "search_cap": exc.search_cap,
            "best_candidate": exc.best_candidate,
            "best_violation": exc.best_violation})
        print(f"extraction failed at step {exc.step}: "
              f"best candidate {exc.best_candidate} violated by "
              f"{exc.best_violation:.3g} (threshold {exc.eps:.3g})")
        return EXIT_EXTRACT
    write_json(os.path.join(out, "plan.json"), plan.to_json())
    write_json(os.path.join(out, "corrector.json"), D.to_json())
    check = verify_plan(plan, model, D)
    write_json(os.path.join(out, "plan_check.json"), _jsonable(check))
    return EXIT_OK if check["ok"] else EXIT_VIOLATION


def _resolve_indices(cfg: dict, n_grid) -> list:
    if cfg["plan_path"]:
        with open(cfg["plan_path"], encoding="utf-8") as fh:
            return [int(k) for k in json.load(fh)["indices"]]
    if cfg["indices"] is not None:
        return [int(k) for k in cfg["indices"]]
    return list(range(1, max(n_grid) + 1))


def cmd_verify(cfg: dict, out: str) -> int:
    model = _require_model(cfg)
    if int(cfg["reps"]) < 1:
        raise UsageError("reps must be >= 1")
    n_grid = [int(N) for N in cfg["n_grid"]]
    indices = _resolve_indices(cfg, n_grid)
    D = build_corrector(cfg["corrector"], model, n_grid)
    report = wlln_probe(model, indices, D, float(cfg["epsilon"]), n_grid,
                        int(cfg["reps"]), int(cfg["seed"]),
                        pass_threshold=float(cfg["pass_threshold"]),
                        compute_l2=bool(cfg["compute_l2"]))
    write_json(os.path.join(out, "report.json"), report.to_json())
    rows = []
    for N in report.n_grid:
        lo, hi = report.ci[N]
        l2 = report.l2_hat[N] if report.l2_hat is not None else ""
        rows.append((N, report.p_hat[N], lo, hi, l2))
    write_csv(os.path.join(out, "report.csv"),
              ("N", "p_hat", "ci_lo", "ci_hi", "l2_hat"), rows)
    if cfg["gap_probe"]:
        gap = truncation_gap_probe(model, indices, n_grid,
                                   max(int(cfg["reps"]), 100), int(cfg["seed"]),
                                   epsilon=float(cfg["epsilon"]))
        write_json(os.path.join(out, "gap_report.json"), gap.to_json())
    return EXIT_VIOLATION if report.verdict == "violation" else EXIT_OK


def cmd_hereditary(cfg: dict, out: str) -> int:
    model = _require_model(cfg)
    if int(cfg["reps"]) < 1:
        raise UsageError("reps must be >= 1")
    n_grid = [int(N) for N in cfg["n_grid"]]
    indices = _resolve_indices(cfg, n_grid)
    D = build_corrector(cfg["corrector"], model, n_grid)
    patterns = list(cfg["patterns"])
    for p in patterns:
        if p not in PATTERNS:
            raise UsageError(f"unknown thinning pattern {p!r}")
    suite = hereditary_suite(model, indices, D, float(cfg["epsilon"]), n_grid,
                             int(cfg["reps"]), int(cfg["seed"]),
                             patterns=patterns,
                             pass_threshold=float(cfg["pass_threshold"]))
    write_json(os.path.join(out, "hereditary.json"), suite.to_json())
    bad = any(r.verdict == "violation" for r in suite.reports.values())
    return EXIT_VIOLATION if bad else EXIT_OK


# -------------------------------------------------------------------------
# demos: end-to-end pipelines with built-in expected outcomes
# -------------------------------------------------------------------------

_DEMO_MODELS = {
    "counterexample": {
        "kind": "tail_vanishing",
        "params": {"g": {"family": "pareto1", "scale": 1.0}},
        "index_cap": 10**9,
    },
    "example41": {
        "kind": "example41",
        "params": {"rho": {"family": "one-minus-one-over-log"},
                   "symmetric": True},
        "joint_law": "independent",
        "index_cap": 10**15,
    },
    "latent-shift": {
        "kind": "latent_shift",
        "params": {"factor": {"family": "finite",
                              "atoms": [[-1.0, 0.5], [1.0, 0.5]]},
                   "noise": {"family": "finite",
                             "atoms": [[-3.0, 0.5], [3.0, 0.5]]}},
        "index_cap": 10**9,
    },
}


def _summary_lines(title, items):
    lines = [title, "=" * len(title)]
    lines.extend(f"  {k}: {v}" for k, v in items)
    return lines


def cmd_demo(cfg: dict, out: str) -> int:
    name = cfg["name"]
    if name not in _DEMO_MODELS:
        raise UsageError(f"unknown demo {name!r}; "
                         f"choose from {sorted(_DEMO_MODELS)}")
    model = model_from_spec(_DEMO_MODELS[name])
    seed = int(cfg["seed"])
    reps = int(cfg["reps"])
    if reps < 1:
        raise UsageError("reps must be >= 1")
    n_grid = [64, 256, 1024, 4096]
    epsilon = 0.5 if name == "latent-shift" else 0.25
    m_grid = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0]
    n_range = range(1, 33)

    # tails
    profile = tails_mod.build_tail_profile(model, m_grid, n_range)
    write_csv(os.path.join(out, "tails.csv"),
              ("n", "M", "tau", "sigma", "feller_residual"), profile.rows())
    verdicts = {
        "weak_l1": tails_mod.check_weak_l1(profile, model),
        "limsup": tails_mod.check_limsup_condition(profile, model),
        "energy": tails_mod.check_energy_vanishing(model, m_grid, n_range),
    }
    write_json(os.path.join(out, "verdicts.json"),
               {k: _verdict_json(v) for k, v in verdicts.items()})

    # correctors
    D = corr.corrector_weak_l2(model, n_grid)
    write_json(os.path.join(out, "corrector.json"), D.to_json())

    # extraction
    min_index = 10**12 if name == "example41" else 1
    try:
        plan = greedy_extract(model, max(n_grid), n_grid, D, mode="exact",
                              seed=seed, min_index=min_index)
    except ExtractionFailure as exc:
        print(f"extraction failed at step {exc.step}")
        return EXIT_EXTRACT
    write_json(os.path.join(out, "plan.json"), plan.to_json())
    check = verify_plan(plan, model, D)
    write_json(os.path.join(out, "plan_check.json"), _jsonable(check))

    # verification
    report = wlln_probe(model, plan.indices, D, epsilon, n_grid, reps, seed)
    write_json(os.path.join(out, "report.json"), report.to_json())
    gap = truncation_gap_probe(model, plan.indices, n_grid,
                               max(reps // 4, 100), seed, epsilon=epsilon)
    write_json(os.path.join(out, "gap_report.json"), gap.to_json())

    # hereditary behavior (lighter replication budget)
    # thinned grids stop at 1024, where heavy-tailed exceedance is still a
    # few percent, so the consistency bar is coarser than the main probe's
    suite = hereditary_suite(model, plan.indices, D, epsilon,
                             [64, 256, 1024], max(reps // 4, 100), seed,
                             pass_threshold=0.1)
    write_json(os.path.join(out, "hereditary.json"), suite.to_json())

    items = [
        ("model", model.kind),
        ("weak-L1 condition", verdicts["weak_l1"].status),
        ("limsup condition", verdicts["limsup"].status),
        ("energy condition", verdicts["energy"].status),
        ("corrector", D.provenance + (" (all zero)" if D.is_zero() else "")),
        ("plan indices", f"{plan.indices[0]}..{plan.indices[-1]} "
                         f"({len(plan.indices)} steps)"),
        ("plan recheck", "ok" if check["ok"] else "VIOLATED"),
        ("final p_hat", repr(report.p_hat[n_grid[-1]])),
        ("convergence verdict", report.verdict),
        ("gap estimate dominated", gap.dominated),
        ("hereditary all consistent", suite.all_consistent),
    ]

    expected_ok = (check["ok"] and gap.dominated and suite.all_consistent
                   and report.verdict == "consistent-with-wlln")
    if name == "counterexample":
        expected_ok = expected_ok and verdicts["weak_l1"].status == "fails" \
            and verdicts["limsup"].status == "holds" \
            and verdicts["energy"].status == "holds" and D.is_zero()
    elif name == "example41":
        expected_ok = expected_ok and verdicts["weak_l1"].status == "holds-on-grid" \
            and verdicts["energy"].status == "holds" and D.is_zero()
    else:  # latent-shift: the zero corrector must visibly break the law
        wrong = wlln_probe(model, plan.indices, corr.zero_corrector(n_grid),
                           epsilon, n_grid, reps, seed)
        write_json(os.path.join(out, "report_zero_corrector.json"),
                   wrong.to_json())
        items.append(("zero-corrector verdict", wrong.verdict))
        expected_ok = expected_ok and wrong.verdict == "violation"

    items.append(("demo outcome", "pass" if expected_ok else "FAIL"))
    lines = _summary_lines(f"demo: {name}", items)
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8",
              newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if expected_ok else EXIT_VIOLATION


_COMMANDS = {
    "tails": cmd_tails,
    "extract": cmd_extract,
    "verify": cmd_verify,
    "hereditary": cmd_hereditary,
    "demo": cmd_demo,
}


def cmd_rerun(manifest_path: str, out: str) -> int:
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest: {exc}")
    command = manifest.get("command")
    if command not in _COMMANDS:
        raise UsageError(f"manifest names unknown command {command!r}")
    cfg = resolve_config(command, manifest.get("config", {}), {})
    write_manifest(out, command, cfg)
    return _COMMANDS[command](cfg, out)


# -------------------------------------------------------------------------
# argument parsing
# -------------------------------------------------------------------------

def _parse_grid(text: str):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected comma-separated integers")


def _parse_expect(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"bad --expect {item!r}; use condition=status")
        cond, status = item.split("=", 1)
        out[cond] = status
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wllnlab")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", help="output directory "
                                      "(default: $WLLNLAB_OUT)")

    sp = sub.add_parser("tails", help="tail functionals and condition checks")
    common(sp)
    sp.add_argument("--grid", help="comma-separated M grid")
    sp.add_argument("--expect", action="append", metavar="COND=STATUS",
                    help="fail (exit 2) unless the condition verdict matches")

    sp = sub.add_parser("extract", help="greedy near-orthogonal subsequence")
    common(sp)
    sp.add_argument("--grid", help="comma-separated truncation levels")
    sp.add_argument("--mode", choices=("exact", "sample"))

    sp = sub.add_parser("verify", help="Monte Carlo convergence probe")
    common(sp)
    sp.add_argument("--grid", help="comma-separated N grid")
    sp.add_argument("--reps", type=int, help="replications")
    sp.add_argument("--epsilon", type=float)

    sp = sub.add_parser("hereditary", help="thinning-pattern suite")
    common(sp)
    sp.add_argument("--grid", help="comma-separated N grid")
    sp.add_argument("--reps", type=int)
    sp.add_argument("--epsilon", type=float)

    sp = sub.add_parser("demo", help="end-to-end pipeline for a named scenario")
    sp.add_argument("name", choices=sorted(_DEMO_MODELS))
    sp.add_argument("--seed", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--out", help="output directory (default: $WLLNLAB_OUT)")

    sp = sub.add_parser("rerun", help="replay a run from its manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", help="output directory (default: $WLLNLAB_OUT)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        out = _out_dir(args)
        if args.command == "rerun":
            return cmd_rerun(args.manifest, out)
        overrides = {"seed": getattr(args, "seed", None)}
        if args.command == "demo":
            cfg_file = {}
            overrides.update(name=args.name, reps=args.reps)
        else:
            cfg_file = load_config_file(args.config)
            grid = getattr(args, "grid", None)
            grid = _parse_grid(grid) if grid else None
            if args.command == "tails":
                overrides.update(m_grid=grid,
                                 expect=_parse_expect(args.expect) or None)
            else:
                overrides.update(n_grid=grid)
            if args.command == "extract":
                overrides.update(mode=args.mode)
            if args.command in ("verify", "hereditary"):
                overrides.update(reps=args.reps, epsilon=args.epsilon)
        cfg = resolve_config(args.command, cfg_file, overrides)
        write_manifest(out, args.command, cfg)
        return _COMMANDS[args.command](cfg, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
