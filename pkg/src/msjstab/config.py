#!/usr/bin/env python3
"""
msjstab.config

Load named systems and run files from TOML and read environment defaults.
Also holds the thread-pool map shared by the sweeps and the simulator.
"""

from __future__ import annotations

import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, TypeVar

from .errors import ParameterError

THREADS_ENV = "MSJSTAB_THREADS"
LOG_LEVEL_ENV = "MSJSTAB_LOG_LEVEL"

PARAM_KEYS = ("n1", "n2", "n", "mu1", "mu2", "p1")

# relative band around a threshold inside which a verdict is BOUNDARY
BOUNDARY_TOL = 1e-12

T = TypeVar("T")
R = TypeVar("R")


def load_toml(path: Path) -> dict:
    with open(path, "rb") as f:
        try:
            return tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ParameterError(f"malformed TOML in {path}: {e}") from e


def load_systems(path: Path | None = None) -> dict[str, dict]:
    """Named parameter tables from [systems.<name>]; the packaged catalogue by default."""
    if path is None:
        with resources.files("msjstab").joinpath("systems.toml").open("rb") as f:
            d = tomllib.load(f)
    else:
        d = load_toml(path)
    return d.get("systems", {})


def system_params(name: str, path: Path | None = None) -> dict:
    systems = load_systems(path)
    if name not in systems:
        known = ", ".join(sorted(systems))
        raise ParameterError(f"unknown system {name!r} (known: {known})")
    entry = systems[name]
    return {k: entry[k] for k in PARAM_KEYS if k in entry}


def load_run_config(path: Path) -> dict:
    """A run file: optional [params], [grid] and [sim] tables."""
    d = load_toml(path)
    unknown = set(d) - {"params", "grid", "sim", "system"}
    if unknown:
        raise ParameterError(f"unknown table(s) in {path}: {sorted(unknown)}")
    return d


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def default_log_level() -> int:
    name = os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.WARNING


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Map in a thread pool; results come back in input order."""
    items = list(items)
    workers = workers or default_threads()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
