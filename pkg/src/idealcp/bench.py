"""Benchmark sweeps: clique-screen timing grids and small decomposition suites.

A suite is a plain dict (or a JSON file holding one)::

    {"kind": "screen", "n": [10, 12], "m": [4, 6], "nzd": [0.4, 0.8],
     "instances": 5, "seed": 0}

    {"kind": "decompose", "n": [4, 6], "m": [3, 4], "num_atoms": [2],
     "max_support": 3, "instances": 3, "seed": 0, "level": null}

Cells run in a process pool when ``jobs > 1``; rows are always reported in
cell-key order, so the output is independent of scheduling.
"""
from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .cliques import maximal_cliques, necessary_condition
from .decompose import DecomposeOptions, decompose
from .tensor import random_binary_sparse, random_cp

PRESETS = {
    # the clique-generation timing grid
    "screen-grid": {"kind": "screen", "n": [10, 12, 14], "m": [4, 6, 8],
                    "nzd": [0.4, 0.8, 0.98], "instances": 5, "seed": 0},
    "screen-diagonal": {"kind": "screen", "n": [10, 12, 14], "m": [4, 6, 8],
                        "nzd": [0.0], "instances": 5, "seed": 0},
    "cp-small": {"kind": "decompose", "n": [4, 6, 8], "m": [3, 4], "num_atoms": [3],
                 "max_support": 4, "instances": 2, "seed": 0},
}


def load_suite(spec) -> dict:
    """A preset name, a path to a JSON suite file, or a suite dict."""
    if isinstance(spec, dict):
        return dict(spec)
    if spec in PRESETS:
        return dict(PRESETS[spec])
    return json.loads(Path(spec).read_text())


def _cells(suite: dict):
    if suite["kind"] == "screen":
        return list(itertools.product(suite["n"], suite["m"], suite["nzd"]))
    return list(itertools.product(suite["n"], suite["m"], suite["num_atoms"]))


def _instance_seed(base: int, key, i: int) -> int:
    # stable across processes, unlike hash()
    words = [int(base), *(int(round(float(x) * 1000)) for x in key), i]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def _run_screen_cell(suite: dict, key) -> dict:
    n, m, nzd = key
    times, passed = [], 0
    for i in range(suite["instances"]):
        a = random_binary_sparse(n, m, nzd, seed=_instance_seed(suite.get("seed", 0), key, i))
        tic = time.perf_counter()
        c = maximal_cliques(a)
        ok = necessary_condition(a, c).passed
        times.append(time.perf_counter() - tic)
        passed += ok
    return {"n": n, "m": m, "nzd": nzd, "instances": suite["instances"],
            "screen_pass": passed, "screen_fail": suite["instances"] - passed,
            "max_time": max(times, default=0.0)}


def _run_decompose_cell(suite: dict, key) -> dict:
    n, m, r = key
    opts = DecomposeOptions(level=suite.get("level"), max_level=suite.get("max_level"))
    rows = []
    for i in range(suite["instances"]):
        a, _ = random_cp(n, m, r, min(suite.get("max_support", n), n),
                         seed=_instance_seed(suite.get("seed", 0), key, i))
        v = decompose(a, opts)
        last = v.diagnostics[-1] if v.diagnostics else None
        rows.append({
            "verdict": v.kind.value,
            "levels": v.levels,
            "reconstruction_error": v.reconstruction_error,
            "atoms": None if v.decomposition is None else len(v.decomposition),
            "max_psd_block": None if last is None else last.problem.get("max_psd_block"),
            "flat": None if last is None else [f.flat for f in last.flatness],
            "sdp_time": v.timings.get("sdp", 0.0),
            "total_time": v.timings.get("total", 0.0),
        })
    return {"n": n, "m": m, "num_atoms": r, "instances": rows}


def _run_cell(args):
    suite, key = args
    try:
        if suite["kind"] == "screen":
            return _run_screen_cell(suite, key)
        return _run_decompose_cell(suite, key)
    except Exception as exc:  # record and keep sweeping
        return {"cell": list(key), "error": f"{type(exc).__name__}: {exc}"}


def run_suite(suite, jobs: int = 1) -> dict:
    """Run every cell of ``suite`` and return ``{"suite": ..., "cells": [...]}``."""
    suite = load_suite(suite)
    work = [(suite, key) for key in _cells(suite)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            cells = list(pool.map(_run_cell, work))
    else:
        cells = [_run_cell(w) for w in work]
    return {"suite": suite, "cells": cells}


TIMING_KEYS = ("max_time", "sdp_time", "total_time")


def strip_timings(obj):
    """Copy of a bench report with wall-clock fields removed."""
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


def format_report(report: dict) -> str:
    suite, cells = report["suite"], report["cells"]
    out = []
    if suite["kind"] == "screen":
        out.append(f"{'n':>4} {'m':>3} {'nzd':>5} {'pass':>5} {'fail':>5} {'max time (s)':>13}")
        for c in cells:
            if "error" in c:
                out.append(f"cell {c['cell']}: {c['error']}")
                continue
            out.append(f"{c['n']:>4} {c['m']:>3} {c['nzd']:>5} {c['screen_pass']:>5} "
                       f"{c['screen_fail']:>5} {c['max_time']:>13.4f}")
        total = sum(c.get("instances", 0) for c in cells)
        fails = sum(c.get("screen_fail", 0) for c in cells)
        if total:
            out.append(f"screen failures: {fails}/{total} ({100 * fails / total:.1f}%)")
    else:
        out.append(f"{'n':>3} {'m':>3} {'R':>3} {'verdict':>26} {'levels':>10} {'block':>6} "
                   f"{'l1 error':>10} {'SDP (s)':>8} {'total (s)':>9}")
        for c in cells:
            if "error" in c:
                out.append(f"cell {c['cell']}: {c['error']}")
                continue
            for r in c["instances"]:
                err = "-" if r["reconstruction_error"] is None else f"{r['reconstruction_error']:.1e}"
                lv = ",".join(map(str, r["levels"]))
                out.append(f"{c['n']:>3} {c['m']:>3} {c['num_atoms']:>3} {r['verdict']:>26} {lv:>10} "
                           f"{str(r['max_psd_block']):>6} {err:>10} {r['sdp_time']:>8.3f} "
                           f"{r['total_time']:>9.3f}")
    return "\n".join(out) + "\n"
