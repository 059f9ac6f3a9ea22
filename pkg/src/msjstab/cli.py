#!/usr/bin/env python3
"""
msjstab command line.

  msjstab analyze      --system 3-10-30
  msjstab sweep-mix    --system mix-1-100-200 --p2 0:1:lin:512
  msjstab sweep-ratio  --n1 1 --n2 10 --n 30 --p1 0.5 --ratios 1e-3:1e3:log:400
  msjstab sweep-servers --n1 1 --n2 10 --mu1 2 --mu2 1 --p1 0.5 --servers 10:100:lin:91
  msjstab rm           --n 4 --mu 1 --probs 1:0.5,2:0.5 --lam 1.0
  msjstab simulate     --system tiny --mode saturated --horizon 1e5 --seed 1
  msjstab verify       --n1 3 --n2 10 --n 30 --p1 0.5 --mu1 2 --mu2 1
  msjstab response     --system es1-p20 --fractions 0.5,0.8,0.9,0.98
  msjstab estimate     --system tiny --tolerance 0.05

Exit status: 0 ok, 1 invalid parameters, 2 bad flags, 3 verification over tolerance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import tomli_w

from . import config as cfgmod
from .errors import ConsistencyError, EnumerationTooLarge, ParameterError, ReducibleChainError
from .model import MsjParams, validate
from .phases import (
    RmParams,
    mean_inverse_sigma,
    rm_is_stable,
    rm_throughput_dp,
    rm_throughput_enumerate,
    rm_verify_balance,
)
from .saturated import (
    BALANCE_TOL,
    ctmc_balance_residual,
    embedded_steady_state,
    solve_dtmc_oracle,
    transition_matrix,
    verify_balance,
)
from .simulator import (
    OPEN,
    SATURATED,
    SimConfig,
    estimate_lambda_star_empirical,
    response_time_curve,
    simulate_many,
)
from .stability import (
    classify,
    grid,
    lambda_star,
    report,
    sweep_mix,
    sweep_ratio,
    sweep_servers,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RESIDUAL = 3

MIX_COLUMNS = ["p2", "lambda1_star", "lambda2_star", "wastage", "utilization",
               "naive_lambda1", "naive_lambda2"]
RATIO_COLUMNS = ["ratio", "wastage"]
SERVERS_COLUMNS = ["n", "lambda_star", "wastage", "utilization"]
RESPONSE_COLUMNS = ["fraction", "lam", "mean_response_time", "stderr", "mean_queue_length"]

# placeholders for parameters a sweep overrides on every row
SWEEP_FILL = {"sweep-mix": {"p1": 0.5}, "sweep-ratio": {"mu1": 1.0, "mu2": 1.0},
              "sweep-servers": {}}


# ---------- parsing helpers ----------

def parse_range(text: str) -> list[float]:
    """'lo:hi:lin|log:count' or a comma-separated list of values."""
    parts = text.split(":")
    if len(parts) == 4:
        lo, hi, scale, count = parts
        try:
            return [float(x) for x in grid(float(lo), float(hi), scale, int(count))]
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:lin|log:count or a list, got {text!r}") from None


def parse_probs(text: str) -> dict[int, float]:
    """'1:0.7,4:0.3' -> {1: 0.7, 4: 0.3}."""
    out = {}
    try:
        for item in text.split(","):
            k, p = item.split(":")
            out[int(k)] = float(p)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected k:p[,k:p...], got {text!r}") from None
    return out


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system", help="named system from the catalogue (see systems.toml)")
    p.add_argument("--systems-file", type=Path, help="alternative system catalogue")
    p.add_argument("--config", type=Path, help="TOML run file with [params]/[grid]/[sim]")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--mu1", type=float)
    p.add_argument("--mu2", type=float)
    p.add_argument("--p1", type=float)


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", type=Path, help="output file (default: stdout)")
    p.add_argument("--format", choices=["csv", "json", "toml"])
    p.add_argument("--workers", type=int, help=f"worker threads (default: ${cfgmod.THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msjstab", description=__doc__.splitlines()[1])
    parser.add_argument("--log-level", default=None, help=f"default: ${cfgmod.LOG_LEVEL_ENV} or WARNING")
    parser.add_argument("--log-file", type=Path)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="stability report for one system")
    _add_param_flags(p)
    _add_output_flags(p)
    p.add_argument("--lam", type=float, help="also classify this arrival rate")

    p = sub.add_parser("sweep-mix", help="stability region over the class mix p2")
    _add_param_flags(p)
    _add_output_flags(p)
    p.add_argument("--p2", type=parse_range, help="p2 grid (default 0:1:lin:512)")

    p = sub.add_parser("sweep-ratio", help="wastage against mu2/mu1")
    _add_param_flags(p)
    _add_output_flags(p)
    p.add_argument("--ratios", type=parse_range, help="ratio grid (default 1e-3:1e3:log:400)")

    p = sub.add_parser("sweep-servers", help="wastage against the number of servers")
    _add_param_flags(p)
    _add_output_flags(p)
    p.add_argument("--servers", type=parse_range, required=True)

    p = sub.add_parser("rm", help="single-service-rate model with arbitrary server demands")
    _add_output_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--probs", type=parse_probs, required=True, help="k:p_k pairs, e.g. 1:0.5,2:0.5")
    p.add_argument("--lam", type=float)
    p.add_argument("--method", choices=["dp", "enumerate", "both"], default="dp")
    p.add_argument("--check-balance", action="store_true")

    p = sub.add_parser("simulate", help="discrete-event simulation")
    _add_param_flags(p)
    _add_output_flags(p)
    p.add_argument("--mode", choices=[SATURATED, OPEN], default=None)
    p.add_argument("--lam", type=float)
    p.add_argument("--load", type=float, help="open mode: lambda as a fraction of lambda*")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--warmup", type=float, default=None)
    p.add_argument("--batches", type=int, default=None)

    p = sub.add_parser("verify", help="balance residuals and oracle agreement")
    _add_param_flags(p)
    _add_output_flags(p)
    p.add_argument("--tol", type=float, default=BALANCE_TOL)

    p = sub.add_parser("response", help="simulated mean response time against load")
    _add_param_flags(p)
    _add_output_flags(p)
    p.add_argument("--fractions", type=parse_range, default=[0.5, 0.7, 0.8, 0.9, 0.95, 0.98])
    p.add_argument("--events", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("estimate", help="bracket lambda* by simulation")
    _add_param_flags(p)
    _add_output_flags(p)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--events", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def resolve_params(args: argparse.Namespace, run: dict) -> MsjParams:
    """Catalogue entry, then run-file [params], then explicit flags."""
    values: dict = dict(SWEEP_FILL.get(args.command, {}))
    system = args.system or run.get("system")
    if system:
        values.update(cfgmod.system_params(system, args.systems_file))
    values.update(run.get("params", {}))
    for key in cfgmod.PARAM_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    missing = [k for k in cfgmod.PARAM_KEYS if k not in values]
    if missing:
        raise ParameterError(f"missing parameter(s): {', '.join(missing)}")
    params = MsjParams(n1=values["n1"], n2=values["n2"], n=values["n"],
                       mu1=float(values["mu1"]), mu2=float(values["mu2"]), p1=float(values["p1"]))
    validate(params)
    return params


# ---------- output ----------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _plain(obj):
    """Dataclasses, numpy scalars and tuples to JSON/TOML-friendly values."""
    if hasattr(obj, "as_dict"):
        return _plain(obj.as_dict())
    if is_dataclass(obj):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _drop_none(obj):
    if isinstance(obj, dict):
        return {k: _drop_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, list):
        return [_drop_none(v) for v in obj]
    return obj


def render_json(obj, level: int = 0) -> str:
    """Indented JSON with floats at 17 significant digits; nan and inf become null."""
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return f"{obj:.17g}" if math.isfinite(obj) else "null"
    pad, end = "  " * (level + 1), "  " * level
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {render_json(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + render_json(v, level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot write {type(obj).__name__} as JSON")


def render_csv(rows: Sequence, columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)   # RFC-4180: comma separated, CRLF line endings
    w.writerow(columns)
    for r in rows:
        d = _plain(r)
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


def render(payload: dict, fmt: str, rows: Sequence | None = None,
           columns: list[str] | None = None) -> str:
    if fmt == "csv":
        if rows is None:
            raise ParameterError("this command has no tabular output; use --format json or toml")
        return render_csv(rows, columns)
    if fmt == "toml":
        return tomli_w.dumps(_drop_none(_plain(payload)))
    return render_json(_plain(payload)) + "\n"


def emit(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    log.info("wrote %s", output)


# ---------- commands ----------

def cmd_analyze(args, run) -> tuple[int, str]:
    params = resolve_params(args, run)
    rep = report(params)
    payload = {"command": "analyze", "params": params.as_dict(), "report": rep.as_dict()}
    if args.lam is not None:
        payload["lam"] = args.lam
        payload["verdict"] = classify(params, args.lam).value
    return EXIT_OK, render(payload, args.format or "json")


def _grid_from(args, run, attr: str, key: str):
    values = getattr(args, attr, None)
    if values is None and key in run.get("grid", {}):
        values = parse_range(str(run["grid"][key]))
    return values


def cmd_sweep_mix(args, run) -> tuple[int, str]:
    params = resolve_params(args, run)
    rows = sweep_mix(params, _grid_from(args, run, "p2", "p2"), workers=args.workers)
    payload = {"command": "sweep-mix", "params": params.as_dict(), "rows": rows}
    return EXIT_OK, render(payload, args.format or "csv", rows, MIX_COLUMNS)


def cmd_sweep_ratio(args, run) -> tuple[int, str]:
    params = resolve_params(args, run)
    rows = sweep_ratio(params, _grid_from(args, run, "ratios", "ratios"), workers=args.workers)
    payload = {"command": "sweep-ratio", "params": params.as_dict(), "rows": rows}
    return EXIT_OK, render(payload, args.format or "csv", rows, RATIO_COLUMNS)


def cmd_sweep_servers(args, run) -> tuple[int, str]:
    ns = [int(x) for x in args.servers]
    if not ns:
        raise ParameterError("empty server grid")
    # n comes from the grid; the template is validated at the largest n
    if args.n is None:
        args.n = max(ns)
    params = resolve_params(args, run)
    rows = sweep_servers(params, ns, workers=args.workers)
    payload = {"command": "sweep-servers", "params": params.as_dict(), "rows": rows}
    return EXIT_OK, render(payload, args.format or "csv", rows, SERVERS_COLUMNS)


def cmd_rm(args, run) -> tuple[int, str]:
    rm = RmParams.create(args.n, args.mu, args.probs)
    result: dict = {"n": rm.n, "mu": rm.mu, "class_probs": {str(k): p for k, p in rm.demands}}
    if args.method in ("dp", "both"):
        result["throughput_dp"] = rm_throughput_dp(rm)
        result["mean_inverse_sigma"] = mean_inverse_sigma(rm)
    if args.method in ("enumerate", "both"):
        result["throughput_enumerate"] = rm_throughput_enumerate(rm, workers=args.workers)
    if args.lam is not None:
        result["lam"] = args.lam
        result["verdict"] = rm_is_stable(rm, args.lam).value
    status = EXIT_OK
    if args.check_balance:
        residual = rm_verify_balance(rm)
        result["balance_residual"] = residual
        if residual >= BALANCE_TOL:
            status = EXIT_RESIDUAL
    return status, render({"command": "rm", "result": result}, args.format or "json")


def cmd_simulate(args, run) -> tuple[int, str]:
    params = resolve_params(args, run)
    sim = dict(run.get("sim", {}))
    for key in ("mode", "lam", "seed", "horizon", "warmup", "batches"):
        v = getattr(args, key)
        if v is not None:
            sim[key] = v
    if args.load is not None:
        sim["mode"] = OPEN
        sim["lam"] = args.load * lambda_star(params)
    seed = int(sim.pop("seed", 0))
    configs = [SimConfig(params, seed=seed + i, **sim) for i in range(args.seeds)]
    stats = simulate_many(configs, workers=args.workers)
    runs = [{"seed": c.seed, "mode": c.mode, "lam": c.lam, "horizon": c.horizon,
             "warmup": c.warmup, "batches": c.batches, "stats": s.as_dict()}
            for c, s in zip(configs, stats)]
    payload = {"command": "simulate", "params": params.as_dict(),
               "lambda_star": lambda_star(params), "runs": runs}
    return EXIT_OK, render(payload, args.format or "json")


def cmd_verify(args, run) -> tuple[int, str]:
    params = resolve_params(args, run)
    balance = verify_balance(params, args.tol)
    pi = embedded_steady_state(params).probs
    oracle_pi = solve_dtmc_oracle(transition_matrix(params)).probs
    oracle_diff = float(np.max(np.abs(pi - oracle_pi)))
    ctmc_res = ctmc_balance_residual(params)
    ok = balance.ok and ctmc_res < args.tol and oracle_diff < 1e-9
    payload = {"command": "verify", "params": params.as_dict(), "balance": balance.as_dict(),
               "ctmc_balance_residual": ctmc_res, "oracle_max_abs_diff": oracle_diff, "ok": ok}
    return (EXIT_OK if ok else EXIT_RESIDUAL), render(payload, args.format or "json")


def cmd_response(args, run) -> tuple[int, str]:
    params = resolve_params(args, run)
    rows = response_time_curve(params, args.fractions, events=args.events,
                               seed=args.seed, workers=args.workers)
    payload = {"command": "response", "params": params.as_dict(),
               "lambda_star": lambda_star(params), "rows": rows}
    return EXIT_OK, render(payload, args.format or "csv", rows, RESPONSE_COLUMNS)


def cmd_estimate(args, run) -> tuple[int, str]:
    params = resolve_params(args, run)
    lo, hi = estimate_lambda_star_empirical(params, args.tolerance, args.events, args.seed)
    payload = {"command": "estimate", "params": params.as_dict(), "interval": [lo, hi],
               "lambda_star": lambda_star(params)}
    return EXIT_OK, render(payload, args.format or "json")


COMMANDS = {
    "analyze": cmd_analyze,
    "sweep-mix": cmd_sweep_mix,
    "sweep-ratio": cmd_sweep_ratio,
    "sweep-servers": cmd_sweep_servers,
    "rm": cmd_rm,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "response": cmd_response,
    "estimate": cmd_estimate,
}


def _setup_logging(args) -> None:
    level = cfgmod.default_log_level()
    if args.log_level:
        named = logging.getLevelName(args.log_level.upper())
        level = named if isinstance(named, int) else level
    logging.basicConfig(format="%(asctime)s %(levelname)s: %(message)s", level=level)
    if args.log_file:
        handler = logging.FileHandler(args.log_file)
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s: %(message)s"))
        logging.getLogger().addHandler(handler)


def _fail(kind: str, message: str, status: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return status


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)   # exits with status 2 on bad flags
    _setup_logging(args)
    try:
        run = cfgmod.load_run_config(args.config) if getattr(args, "config", None) else {}
        status, text = COMMANDS[args.command](args, run)
    except (ParameterError, EnumerationTooLarge, ReducibleChainError, argparse.ArgumentTypeError) as e:
        return _fail(type(e).__name__, str(e), EXIT_INVALID)
    except ConsistencyError as e:
        return _fail(type(e).__name__, str(e), EXIT_RESIDUAL)
    except (OSError, TypeError) as e:
        return _fail(type(e).__name__, str(e), EXIT_INVALID)
    emit(text, args.output)
    return status


if __name__ == "__main__":
    sys.exit(main())
