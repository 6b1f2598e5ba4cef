"""Command-line front end: ``python -m agpmps {agp,scan,benchmark,oracle} config.json``.

A run is driven by one JSON document validated against :data:`SCHEMA`.
``--set a.b=value`` overrides any scalar (the value is parsed as JSON when
possible). Exit codes: 0 success, 2 configuration error, 3 solver failure in
a required stage. ``AGPMPS_NUM_THREADS`` caps the BLAS thread pool.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from .agp import agp_schedule, build_superoperator, compute_agp
from .io import save_agp_result
from .models import ModelFamily, SectorSpec
from .oracle import ff_low_energies
from .solvers import SweepSchedule
from .tensor import TruncationPolicy
from .transport import (
    BENCHMARK_GRID,
    TransportPlan,
    agp_path,
    benchmark_agp_vs_random,
    transport,
    write_benchmark_csv,
    write_records_csv,
    write_records_jsonl,
)

log = logging.getLogger("agpmps")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
THREADS_ENV = "AGPMPS_NUM_THREADS"
AGP_COLUMNS = ("L", "lambda", "D", "rel_residual", "norm", "scaled_norm", "alpha1", "wall_time_s")


class ConfigError(Exception):
    pass


class SolverFailure(Exception):
    pass


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int1 = {"type": "integer", "minimum": 1}
_numlist = {"type": "array", "items": _num, "minItems": 1}
_parity = {"enum": ["even", "odd", "none"]}

_MODEL = _obj(
    {"name": {"enum": ["TFIM", "LTFIM"]}, "L": {"type": "integer", "minimum": 2}, "h": _num},
    required=("name", "L"),
)
_OUTPUT = _obj(
    {
        "csv": {"type": "string"},
        "jsonl": {"type": "string"},
        "summary": {"type": "string"},
        "checkpoint_dir": {"type": ["string", "null"]},
    }
)
_AGP = _obj(
    {
        "lambdas": _numlist,
        "path": _obj(
            {
                "lambda_i": _num,
                "lambda_f": _num,
                "delta0": _pos,
                "delta_max": _pos,
                "delta_min": _pos,
                "step_constant": {"type": ["number", "null"]},
            },
            required=("lambda_i", "lambda_f"),
        ),
        "D": {"type": "array", "items": _int1, "minItems": 1},
        "cutoff": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "max_sweeps": _int1,
        "continuation": {"type": "boolean"},
    },
    required=("D",),
)
_SCAN = _obj(
    {
        "lambda_i": _num,
        "lambda_f": _num,
        "k": _int1,
        "sectors": {"type": "array", "items": _parity, "minItems": 1},
        "modes": {"type": "array", "items": {"enum": ["agp-only", "agp+dmrg"]}, "minItems": 1},
        "grid": {"type": ["array", "null"], "items": _num},
        "step_constant": {"type": ["number", "null"]},
        "delta0": _pos,
        "delta_max": _pos,
        "delta_min": _pos,
        "agp_D": _int1,
        "agp_cutoff": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "agp_max_sweeps": _int1,
        "initial_tol": _pos,
        "intermediary_tol": _pos,
        "final_tol": _pos,
        "dmrg_cutoff": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "final_cutoff": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "max_bond_dim": _int1,
        "tdvp_cutoff": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "tdvp_substeps": {"type": ["integer", "null"], "minimum": 1},
        "penalty_weight": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "init_bond_dim": _int1,
        "final_dmrg": {"type": ["boolean", "null"]},
    },
    required=("lambda_i", "lambda_f"),
)
_BENCH = _obj(
    {
        "L": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "k": _int1,
        "realizations": _int1,
        "sector": _parity,
        "grid": _numlist,
        "agp_D": _int1,
        "agp_cutoff": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "initial_tol": _pos,
        "intermediary_tol": _pos,
        "final_tol": _pos,
        "dmrg_cutoff": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "final_cutoff": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "init_bond_dim": _int1,
    },
    required=("L",),
)
_ORACLE = _obj(
    {
        "lambdas": _numlist,
        "k": _int1,
        "sectors": {"type": "array", "items": _parity, "minItems": 1},
    },
    required=("lambdas",),
)

SCHEMA = _obj(
    {
        "model": _MODEL,
        "seed": {"type": "integer", "minimum": 0},
        "log_level": {"enum": ["DEBUG", "INFO", "WARNING", "ERROR"]},
        "output": _OUTPUT,
        "agp": _AGP,
        "scan": _SCAN,
        "benchmark": _BENCH,
        "oracle": _ORACLE,
    },
    required=("model",),
)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    out = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        key, text = item.split("=", 1)
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = _parse_value(text)
    return out


def load_config(path, overrides=(), command: str | None = None) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    cfg = apply_overrides(cfg, overrides)
    validate(cfg, command)
    return cfg


def validate(cfg: dict, command: str | None = None) -> None:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc
    if command is not None and command not in cfg:
        raise ConfigError(f"config has no {command!r} section")
    if command == "agp" and ("lambdas" in cfg["agp"]) == ("path" in cfg["agp"]):
        raise ConfigError("agp section needs exactly one of 'lambdas' or 'path'")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _model(cfg) -> ModelFamily:
    m = cfg["model"]
    return ModelFamily(m["name"], m["L"], float(m.get("h", 0.0)))


def _outputs(cfg, command):
    out = cfg.get("output", {})
    csv_path = Path(out.get("csv", f"{command}.csv"))
    jsonl_path = Path(out.get("jsonl", csv_path.with_suffix(".jsonl")))
    summary = Path(out.get("summary", csv_path.with_suffix(".summary.json")))
    for p in (csv_path, jsonl_path, summary):
        p.parent.mkdir(parents=True, exist_ok=True)
    return csv_path, jsonl_path, summary, out.get("checkpoint_dir")


def _write_summary(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, default=float)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_agp(cfg: dict) -> int:
    """Gauge-potential diagnostics for every (lambda, D)."""
    model = _model(cfg)
    sec = cfg["agp"]
    chash = config_hash(cfg)
    csv_path, jsonl_path, summary, ckpt = _outputs(cfg, "agp")
    Ds = sorted(sec["D"])
    cutoff = sec.get("cutoff", 1e-6)
    sweeps = sec.get("max_sweeps", 30)
    continuation = sec.get("continuation", True)
    rows = []
    if "path" in sec:
        p = sec["path"]
        plan = TransportPlan(
            model=model,
            lambda_i=p["lambda_i"],
            lambda_f=p["lambda_f"],
            delta0=p.get("delta0", 0.1),
            delta_max=p.get("delta_max", 0.1),
            delta_min=p.get("delta_min", 0.005),
            step_constant=p.get("step_constant"),
            agp_D=Ds[-1],
            agp_cutoff=cutoff,
            agp_max_sweeps=sweeps,
        )
        for step in agp_path(plan):
            rows.append((step.lam, Ds[-1], step.result, step.delta))
    else:
        for lam in sec["lambdas"]:
            H, dH = model.build(lam)
            A = build_superoperator(H)
            guess = None
            for D in Ds:
                res = compute_agp(H, dH, guess, D, agp_schedule(D, cutoff, sweeps), superoperator=A)
                log.info("agp lambda=%g D=%d residual=%.3e scaled norm=%.6g", lam, D, res.rel_residual, res.scaled_norm)
                rows.append((lam, D, res, None))
                if continuation:
                    guess = res.agp
    with open(csv_path, "w", newline="") as fh, open(jsonl_path, "w") as jf:
        w = csv.writer(fh)
        w.writerow(AGP_COLUMNS)
        for lam, D, res, delta in rows:
            vals = [model.L, lam, D, res.rel_residual, res.norm, res.scaled_norm, res.alpha1, res.wall_time]
            w.writerow([v if isinstance(v, int) else repr(float(v)) for v in vals])
            rec = dict(zip(AGP_COLUMNS, vals))
            rec.update(
                config_hash=chash,
                delta=delta,
                raw_residual=res.raw_residual,
                raw_norm=res.raw_norm,
                antihermitian=res.antihermitian,
                bond_dim=res.bond_dim,
                sweeps=res.sweeps,
                converged=bool(res.converged),
            )
            jf.write(json.dumps(rec, default=float) + "\n")
            if ckpt:
                Path(ckpt).mkdir(parents=True, exist_ok=True)
                save_agp_result(res, Path(ckpt) / f"agp_L{model.L}_lam{lam:.6g}_D{D}.bin", {"config_hash": chash})
    _write_summary(summary, {"config_hash": chash, "rows": len(rows), "total_time_s": sum(r[2].wall_time for r in rows)})
    return EXIT_OK


def _schedules(sec):
    cut = sec.get("dmrg_cutoff", 1e-10)
    maxdim = sec.get("max_bond_dim", 200)
    initial = SweepSchedule(max_sweeps=20, policy=TruncationPolicy(cut, maxdim), rel_energy_tol=sec.get("initial_tol", 1e-5))
    inter = SweepSchedule(max_sweeps=10, policy=TruncationPolicy(cut, maxdim), rel_energy_tol=sec.get("intermediary_tol", 1e-6))
    final = SweepSchedule(
        max_sweeps=40,
        policy=TruncationPolicy(sec.get("final_cutoff", 1e-11), max(maxdim, 300)),
        rel_energy_tol=sec.get("final_tol", 1e-11),
    )
    return initial, inter, final


def build_plans(cfg: dict) -> list[TransportPlan]:
    from .tdvp import TdvpOptions

    model = _model(cfg)
    sec = cfg["scan"]
    default_sectors = ["even", "odd"] if model.conserves_parity else ["none"]
    initial, inter, final = _schedules(sec)
    tdvp = TdvpOptions(
        substeps=sec.get("tdvp_substeps"),
        policy=TruncationPolicy(sec.get("tdvp_cutoff", 1e-10), sec.get("max_bond_dim", 200)),
    )
    plans = []
    for mode in sec.get("modes", ["agp+dmrg"]):
        for parity in sec.get("sectors", default_sectors):
            plans.append(
                TransportPlan(
                    model=model,
                    sector=SectorSpec(parity),
                    lambda_i=sec["lambda_i"],
                    lambda_f=sec["lambda_f"],
                    k=sec.get("k", 10),
                    step_constant=sec.get("step_constant"),
                    delta0=sec.get("delta0", 0.1),
                    delta_max=sec.get("delta_max", 0.1),
                    delta_min=sec.get("delta_min", 0.005),
                    grid=tuple(sec["grid"]) if sec.get("grid") else None,
                    mode=mode,
                    initial=initial,
                    intermediary=inter,
                    final=final,
                    final_dmrg=sec.get("final_dmrg"),
                    agp_D=sec.get("agp_D", 40),
                    agp_cutoff=sec.get("agp_cutoff", 1e-6),
                    agp_max_sweeps=sec.get("agp_max_sweeps", 30),
                    tdvp=tdvp,
                    init_bond_dim=sec.get("init_bond_dim", 10),
                    penalty_weight=sec.get("penalty_weight"),
                    seed=cfg.get("seed", 0),
                )
            )
    return plans


def cmd_scan(cfg: dict) -> int:
    """Transport the low-lying states of every requested sector and mode."""
    try:
        plans = build_plans(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    chash = config_hash(cfg)
    csv_path, jsonl_path, summary, _ = _outputs(cfg, "scan")
    t0 = time.perf_counter()
    ta = time.perf_counter()
    path = agp_path(plans[0])
    agp_time = time.perf_counter() - ta
    records, stages, initials = [], [], {}
    for plan in plans:
        key = plan.sector.parity
        res = transport(plan, path=path, initial=initials.get(key))
        initials[key] = res.initial
        if not all(r.converged for r in res.initial.results):
            raise SolverFailure(f"initial DMRG did not converge in sector {key}")
        records.extend(res.records)
        stages.append({"mode": plan.mode, "sector": key, "timings": res.timings, "flags": res.flags})
    total = time.perf_counter() - t0
    write_records_csv(records, csv_path)
    write_records_jsonl(records, jsonl_path, {"config_hash": chash})
    stage_totals = {"agp": agp_time}
    for s in stages:
        for name, v in s["timings"].items():
            if name not in ("agp", "total"):
                stage_totals[name] = stage_totals.get(name, 0.0) + v
    _write_summary(
        summary,
        {
            "config_hash": chash,
            "total_time_s": total,
            "stage_time_s": stage_totals,
            "stage_share": {k: v / total for k, v in stage_totals.items()},
            "grid_points": len(path),
            "runs": stages,
        },
    )
    log.info("scan done in %.1f s, gauge potential share %.1f%%", total, 100 * agp_time / total)
    return EXIT_OK


def cmd_benchmark(cfg: dict) -> int:
    """AGP-initialized versus random-initialized DMRG errors and runtimes."""
    model = cfg["model"]
    if model["name"] != "TFIM":
        raise ConfigError(
            "unsupported metric: energy errors need the exact free-fermion spectrum, which exists only "
            "for TFIM; use the scan subcommand and its variance column for LTFIM"
        )
    sec = cfg["benchmark"]
    chash = config_hash(cfg)
    csv_path, jsonl_path, summary, _ = _outputs(cfg, "benchmark")
    initial, inter, final = _schedules(sec)
    table = benchmark_agp_vs_random(
        "TFIM",
        sec["L"],
        sec.get("k", 10),
        sec.get("realizations", 5),
        sector=sec.get("sector", "even"),
        grid=tuple(sec.get("grid", BENCHMARK_GRID)),
        initial=initial,
        intermediary=inter,
        final=final,
        agp_D=sec.get("agp_D", 40),
        agp_cutoff=sec.get("agp_cutoff", 1e-6),
        init_bond_dim=sec.get("init_bond_dim", 10),
        seed=cfg.get("seed", 0),
    )
    write_benchmark_csv(table, csv_path)
    with open(jsonl_path, "w") as fh:
        for r in table.rows:
            fh.write(json.dumps({**r.__dict__, "config_hash": chash}, default=float) + "\n")
    _write_summary(summary, {"config_hash": chash, "summary": table.summary(), "exact": table.exact})
    return EXIT_OK


def cmd_oracle(cfg: dict) -> int:
    """Exact low-lying TFIM energies per parity sector."""
    model = cfg["model"]
    if model["name"] != "TFIM":
        raise ConfigError(
            "unsupported metric: exact energies exist only for TFIM (free fermions); "
            "use the scan subcommand and its variance column for LTFIM"
        )
    sec = cfg["oracle"]
    chash = config_hash(cfg)
    csv_path, jsonl_path, _, _ = _outputs(cfg, "oracle")
    L = model["L"]
    k = sec.get("k", 10)
    with open(csv_path, "w", newline="") as fh, open(jsonl_path, "w") as jf:
        w = csv.writer(fh)
        w.writerow(["L", "lambda", "sector", "level", "energy"])
        for lam in sec["lambdas"]:
            for sector in sec.get("sectors", ["even", "odd"]):
                try:
                    es = ff_low_energies(L, lam, sector, k)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
                for n, e in enumerate(es):
                    w.writerow([L, repr(float(lam)), sector, n, repr(float(e))])
                    jf.write(json.dumps({"L": L, "lambda": lam, "sector": sector, "level": n, "energy": float(e), "config_hash": chash}) + "\n")
    return EXIT_OK


COMMANDS = {"agp": cmd_agp, "scan": cmd_scan, "benchmark": cmd_benchmark, "oracle": cmd_oracle}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agpmps", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("config", help="JSON run configuration")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a scalar field")
        p.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, args.set, args.command)
    except ConfigError as exc:
        print(f"agpmps: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    level = args.log_level or cfg.get("log_level", "INFO")
    logging.basicConfig(level=getattr(logging, level), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    threads = os.environ.get(THREADS_ENV)
    limits = int(threads) if threads and threads.isdigit() else None
    np.random.seed(cfg.get("seed", 0))
    try:
        with threadpool_limits(limits=limits):
            return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"agpmps: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"agpmps: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
