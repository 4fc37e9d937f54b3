"""Parameter sweeps over the hash table size or the (F, L) split of a fixed budget."""
from __future__ import annotations

import csv
import dataclasses
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, RunConfig
from .encoding import parameter_count
from .runner import hash_config, params_for_budget, run_training
from .tasks.report import COLUMNS, TrainReport

AXES = ("T", "F_L")
SUMMARY_COLUMNS = ("axis", "value", "F", "L", "T", "n_params", "status") + COLUMNS


def parse_values(axis: str, text: str) -> list:
    """``T``: comma list of ints (``16384``, ``2^14``); ``F_L``: ``F`` or ``FxL`` items."""
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError("values", "need at least one sweep value")
    out = []
    for it in items:
        try:
            if axis == "T":
                b, _, e = it.partition("^")
                out.append(int(b) ** int(e) if e else int(it))
            elif axis == "F_L":
                F, _, L = it.lower().partition("x")
                out.append((int(F), int(L)) if L else (int(F), None))
            else:
                raise ConfigError("axis", f"expected one of {', '.join(AXES)}, got {axis!r}")
        except ValueError:
            raise ConfigError("values", f"bad sweep value {it!r}") from None
    return out


def sweep_configs(base: RunConfig, axis: str, values) -> list:
    """(label, config) per value; F_L keeps F * T * L at the base product, T rounded to 2^k."""
    if base.encoder != "hash":
        raise ConfigError("encoder", "sweeps vary hash encoding parameters; use encoder = hash")
    budget = base.n_features * base.table_size * base.n_levels
    runs = []
    for v in values:
        if axis == "T":
            label, changes = f"T{v}", dict(table_size=v)
        elif axis == "F_L":
            F, L = v
            L = base.n_levels if L is None else L
            T = params_for_budget(F, L, budget)
            label, changes = f"F{F}_L{L}", dict(n_features=F, n_levels=L, table_size=T)
        else:
            raise ConfigError("axis", f"expected one of {', '.join(AXES)}, got {axis!r}")
        cfg = dataclasses.replace(base, output=str(Path(base.output) / label), **changes)
        runs.append((label, cfg.validate()))
    return runs


def _run_one(cfg: RunConfig):
    try:
        tr, r = run_training(cfg, render=False)
        return "ok", tr.report.rows, r
    except Exception as exc:  # a failed run is recorded and the sweep moves on
        return f"failed: {exc}", [], cfg


def run_sweep(base: RunConfig, axis: str, values, parallel: int = 1, log=None):
    """Returns ``{label: TrainReport or None}``; writes ``summary.csv`` under ``base.output``."""
    runs = sweep_configs(base, axis, values)
    cfgs = [c for _, c in runs]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            results = list(ex.map(_run_one, cfgs))
    else:
        results = []
        for label, c in runs:
            results.append(_run_one(c))
            if log is not None:
                log(f"{label}: {results[-1][0]}")
    out = Path(base.output)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for (label, c), (status, rows, r) in zip(runs, results):
            dim = 2 if c.task == "image" else 3
            try:
                n_params = parameter_count(hash_config(r, dim)) if r.n_max is not None else ""
            except ConfigError:
                n_params = ""
            head = [axis, label, c.n_features, c.n_levels, c.table_size, n_params, status]
            if not rows:
                w.writerow(head + [""] * len(COLUMNS))
                reports[label] = None
                continue
            rep = TrainReport("metric", list(rows))
            reports[label] = rep
            for row in rows:
                w.writerow(head + [row[0], f"{row[1]:.6f}", repr(row[2]), repr(row[3]),
                                   repr(row[4])])
    return reports
