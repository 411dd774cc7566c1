#!/usr/bin/env python3
"""Benchmark suites: every row runs one solver on one generated instance and
compares it with an exact oracle when one is affordable."""

import csv
import os
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional

import psutil

from models.layered import InfeasibilityCertificate
from models.weighted_graph import in_weight
from tools.balancing import brute_force_orientation, orient, solve_balance
from tools.generators import (
    gen_fractional_assignment,
    gen_gap_instance,
    gen_planted_canonical,
    gen_random,
    gen_random_graph,
    gen_random_restricted,
)
from tools.layered_lp import build_layered_graph, build_lp, solve_lp
from tools.oracles import brute_force_opt, solve_vector_enumeration
from tools.solver import solve
from tools.tree_decomposition import bs_decompose
from tools.verify import quota_problems
from utils.errors import GuardExceeded, MaxMinError, UsageError
from utils.logger import LogLevel, Logger
from utils.rational import format_rational

CSV_COLUMNS = ["suite", "instance", "mode", "value", "oracle", "ratio", "seconds", "peak_rss_mb"]
BALANCE_EPSILON = Fraction(1, 20)


@dataclass
class BenchRow:
    suite: str
    instance: str
    mode: str
    value: Optional[Fraction]
    oracle: Optional[Fraction] = None
    seconds: float = 0.0
    peak_rss_mb: float = 0.0

    @property
    def ratio(self) -> Optional[Fraction]:
        if self.value is None or not self.oracle:
            return None
        return self.value / self.oracle

    def as_csv(self) -> Dict[str, str]:
        def show(q: Optional[Fraction]) -> str:
            return "" if q is None else str(format_rational(q))

        return {
            "suite": self.suite,
            "instance": self.instance,
            "mode": self.mode,
            "value": show(self.value),
            "oracle": show(self.oracle),
            "ratio": "" if self.ratio is None else f"{float(self.ratio):.6f}",
            "seconds": f"{self.seconds:.4f}",
            "peak_rss_mb": f"{self.peak_rss_mb:.1f}",
        }


# ? (instance name, mode, value, oracle); the harness adds time and memory
Entry = Iterator[tuple]


def _balance(settings: dict, count: int, logging: Logger) -> Entry:
    for seed in range(count):
        inst = gen_random_restricted(3 + seed % 2, 6 + seed % 3, 6, seed)
        res = solve_balance(
            inst, BALANCE_EPSILON, settings["pricing_guard"], settings["subset_sum_cap"], logging
        )
        opt, _ = brute_force_opt(inst, settings["brute_guard"])
        yield f"restricted-{seed}", "balance", res.value, opt


def _orient(settings: dict, count: int, logging: Logger) -> Entry:
    for seed in range(count):
        small = seed % 2 == 0
        g = gen_random_graph(5 if small else 30, 9 if small else 120, 100, seed)
        orientation = orient(g, logging)
        got = min(in_weight(g, orientation, v) for v in range(g.n_vertices))
        best = brute_force_orientation(g)[0] if small else None
        yield f"graph-{seed}", "orient", got, best


def _gap(settings: dict, count: int, logging: Logger) -> Entry:
    for M in (2, 3):
        ci, pa = gen_gap_instance(M)
        model = build_lp(build_layered_graph(ci, pa, 2), settings["guard_nonzeros"], logging)
        fsol = solve_lp(model, settings["lp_tolerance"], logging)
        lp_value = None if isinstance(fsol, InfeasibilityCertificate) else Fraction(M)
        inst, _ = ci.to_instance()
        try:
            opt: Optional[Fraction] = brute_force_opt(inst, settings["brute_guard"])[0]
        except GuardExceeded:
            opt = None
        yield f"gap-{M}", "layered-lp", lp_value, opt


def _bs(settings: dict, count: int, logging: Logger) -> Entry:
    for seed in range(count):
        x, y = gen_fractional_assignment(4 + seed % 8, 6 + seed % 10, seed)
        agents = sorted(x)
        items = sorted({i for _, i in y} | set(range(6 + seed % 10)))
        dec = bs_decompose(agents, items, x, y)
        yield f"bs-{seed}", "bs-trees", Fraction(len(dec.trees)), None


def _vector(settings: dict, count: int, logging: Logger) -> Entry:
    for seed in range(count):
        inst = gen_random(1 + seed % 3, 4 + seed % 5, 0.7, 16, seed)
        got, _ = solve_vector_enumeration(inst, settings["vector_guard"])
        opt, _ = brute_force_opt(inst, settings["brute_guard"])
        yield f"random-{seed}", "vector", got, opt


def _pipeline(settings: dict, count: int, logging: Logger) -> Entry:
    for seed in range(count):
        ci, _ = gen_planted_canonical(3, 4, 2, seed)
        res = solve(
            ci,
            seed=seed,
            layers=2,
            retry_cap=settings["retry_cap"],
            guard=settings["guard_nonzeros"],
            tol=settings["lp_tolerance"],
            logging=logging,
        )
        ok = res.allocation is not None and not quota_problems(ci, res.allocation, res.final_alpha)
        yield f"planted-{seed}", "layered", Fraction(1 if ok else 0), Fraction(1)


SUITES: Dict[str, Callable[[dict, int, Logger], Entry]] = {
    "balance": _balance,
    "orient": _orient,
    "gap": _gap,
    "bs": _bs,
    "vector": _vector,
    "pipeline": _pipeline,
}


def run_suite(name: str, settings: dict, count: int = 10, logging: Optional[Logger] = None) -> List[BenchRow]:
    """Runs every entry of a suite, timing each and sampling the resident set.

    A solver error in any entry ends the run and propagates, so its exit
    code reaches the caller.
    """
    logging = logging or Logger.quiet()
    if name not in SUITES:
        raise UsageError(f"unknown suite {name!r}, expected one of {', '.join(SUITES)}")
    process = psutil.Process(os.getpid())
    peak = process.memory_info().rss
    rows: List[BenchRow] = []
    entries = SUITES[name](settings, count, logging)
    while True:
        start = time.perf_counter()
        try:
            instance, mode, got, oracle = next(entries)
        except StopIteration:
            break
        except MaxMinError as e:
            logging.log(LogLevel.Error, f"{name}: entry {len(rows)} failed: {e}")
            raise
        elapsed = time.perf_counter() - start
        peak = max(peak, process.memory_info().rss)
        rows.append(BenchRow(name, instance, mode, got, oracle, elapsed, peak / 2**20))
        logging.log(LogLevel.Debug, f"{name}/{instance}: {mode} {got} vs {oracle} in {elapsed:.3f}s")
    logging.log(LogLevel.Info, f"suite {name}: {len(rows)} rows")
    return rows


def write_csv(rows: List[BenchRow], path: str) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_csv())


def format_table(rows: List[BenchRow]) -> str:
    cells = [CSV_COLUMNS] + [[row.as_csv()[c] for c in CSV_COLUMNS] for row in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(CSV_COLUMNS))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in cells
    )
