"""Benchmark harness: solver timings and cross-method agreement on synthetic logit markets."""
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from choice.logit import LogitSpec
from config import config
from market.errors import CupidError, ParameterError
from services.equilibrium import solve
from services.options import Method, SolveOptions
from services.simulation import gen_benchmark

logger = logging.getLogger(__name__)

RECORD_COLUMNS = [
    "size",
    "seed",
    "method",
    "converged",
    "iterations",
    "final_residual",
    "social_welfare",
    "median_time",
    "max_mu_gap",
    "agrees",
    "error",
]


@dataclass
class BenchReport:
    records: pd.DataFrame
    summary: pd.DataFrame
    timings: bool

    @property
    def failures(self) -> int:
        return int((self.records["error"] != "").sum())

    @property
    def all_agree(self) -> bool:
        ok = self.records[self.records["error"] == ""]
        return bool(ok["agrees"].all())

    def to_dict(self) -> dict:
        return {
            "cells": int(len(self.records)),
            "failures": self.failures,
            "all_agree": self.all_agree,
            "timings": self.timings,
        }


class BenchHarness:
    """Runs every (size, seed, method) cell; a failing cell is recorded and skipped."""

    def __init__(
        self,
        methods: Sequence,
        repeats: int = config.BENCH_REPEATS,
        opts: Optional[SolveOptions] = None,
        agreement_tol: float = config.BENCH_AGREEMENT_TOL,
    ):
        if not methods:
            raise ParameterError("bench needs at least one method")
        if int(repeats) < 1:
            raise ParameterError(f"repeats must be at least 1, got {repeats}")
        self.methods = [Method.parse(m) for m in methods]
        self.repeats = int(repeats)
        self.opts = opts or SolveOptions()
        self.agreement_tol = agreement_tol

    def run_instance(self, size: int, seed: int, timings: bool = True) -> List[Dict]:
        instance = gen_benchmark(size, seed)
        nx, ny = instance.margins.shape
        men, women = [LogitSpec()] * nx, [LogitSpec()] * ny
        rows = []
        reference = None
        for method in self.methods:
            row = {"size": size, "seed": seed, "method": method.value, "error": ""}
            try:
                opts = self.opts.replace(method=method)
                elapsed = []
                for _ in range(self.repeats if timings else 1):
                    started = time.perf_counter()
                    equilibrium = solve(men, women, instance.phi, instance.margins, opts)
                    elapsed.append(time.perf_counter() - started)
                report = equilibrium.report
                mu = np.asarray(equilibrium.matching.mu)
                if reference is None:
                    reference = mu
                gap = float(np.abs(mu - reference).max())
                row.update(
                    converged=report.converged,
                    iterations=report.iterations,
                    final_residual=report.final_residual,
                    social_welfare=report.social_welfare,
                    median_time=statistics.median(elapsed) if timings else np.nan,
                    max_mu_gap=gap,
                    agrees=gap <= self.agreement_tol * (1.0 + float(np.abs(reference).max())),
                )
                if not row["agrees"]:
                    logger.warning(f"Bench size={size} seed={seed}: {method.value} disagrees by {gap:.3e}")
            except CupidError as e:
                logger.error(f"Bench cell size={size} seed={seed} method={method.value} failed: {e}")
                row.update(converged=False, iterations=0, final_residual=np.nan, social_welfare=np.nan,
                           median_time=np.nan, max_mu_gap=np.nan, agrees=False, error=str(e))
            rows.append(row)
        return rows

    def run(self, sizes: Sequence[int], seeds: Sequence[int], jobs: int = 1) -> BenchReport:
        """
        Cells run sequentially unless jobs > 1; parallel runs record no timings.
        """
        timings = jobs <= 1
        grid = [(int(size), int(seed)) for size in sizes for seed in seeds]
        logger.info(f"Bench: {len(grid)} instances x {len(self.methods)} methods, repeats={self.repeats}")
        if timings:
            nested = [self.run_instance(size, seed) for size, seed in grid]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                nested = list(pool.map(lambda cell: self.run_instance(*cell, timings=False), grid))
        records = pd.DataFrame([row for rows in nested for row in rows], columns=RECORD_COLUMNS)
        return BenchReport(records, summarize(records), timings)


def summarize(records: pd.DataFrame) -> pd.DataFrame:
    """Plot-ready medians per (size, method)."""
    grouped = records.groupby(["size", "method"], sort=True)
    summary = grouped.agg(
        median_time=("median_time", "median"),
        median_iterations=("iterations", "median"),
        max_residual=("final_residual", "max"),
        converged=("converged", "all"),
        agrees=("agrees", "all"),
        instances=("seed", "count"),
    )
    summary["failures"] = grouped["error"].apply(lambda errors: int((errors != "").sum()))
    return summary.reset_index()


def run_bench(
    sizes: Sequence[int],
    seeds: Sequence[int],
    methods: Sequence,
    repeats: int = config.BENCH_REPEATS,
    jobs: int = 1,
    opts: Optional[SolveOptions] = None,
) -> BenchReport:
    return BenchHarness(methods, repeats, opts).run(sizes, seeds, jobs)
