"""Household-level bootstrap: resample counts, re-estimate, collect replicates."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Union

import numpy as np
import pandas as pd

from config import config
from estimation.min_distance import min_distance
from estimation.mle import mle
from estimation.moment_matching import moment_match
from estimation.spec import ParamModelSpec
from market.errors import CupidError, EstimationError, ParameterError
from market.models import Matching, SampleCounts
from services.simulation import sample_households

logger = logging.getLogger(__name__)

Estimator = Union[str, Callable[[SampleCounts], np.ndarray]]


def replicate_seeds(seed, n: int) -> List[np.random.SeedSequence]:
    """Per-replicate seeds derived from (seed, replicate index)."""
    return np.random.SeedSequence(int(seed)).spawn(n)


def run_replicates(job: Callable[[int, np.random.SeedSequence], object], n: int, seed, jobs: int = 1) -> List:
    """
    Run job(index, seed) for every replicate. Failed replicates are logged and
    returned as None; more than the configured failure rate aborts.
    """
    if int(n) < 1:
        raise ParameterError(f"number of bootstrap draws must be at least 1, got {n}")
    seeds = replicate_seeds(seed, n)

    def guarded(index):
        try:
            return job(index, seeds[index])
        except CupidError as e:
            logger.error(f"Bootstrap replicate {index} failed: {e}")
            return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(guarded, range(n)))
    else:
        results = [guarded(i) for i in range(n)]

    failures = sum(result is None for result in results)
    if failures > config.MAX_BOOTSTRAP_FAILURE_RATE * n:
        raise EstimationError(f"{failures} of {n} bootstrap replicates failed")
    if failures:
        logger.warning(f"{failures} of {n} bootstrap replicates failed and were dropped")
    return results


def estimator_function(spec: ParamModelSpec, estimator: Estimator) -> Callable[[SampleCounts], np.ndarray]:
    if callable(estimator):
        return lambda data: np.asarray(estimator(data), dtype=float).ravel()
    if estimator == "mm":
        return lambda data: moment_match(spec, data, compute_se=False).lam
    if estimator == "mle":
        return lambda data: mle(spec, data, compute_se=False).params
    if estimator == "md":
        return lambda data: min_distance(spec, data).lam
    raise ParameterError(f"unknown estimator '{estimator}' (expected mm, mle or md)")


def parameter_names(spec: ParamModelSpec, estimator: Estimator, size: int):
    if estimator == "mle":
        return list(spec.parameter_names)
    if estimator in ("mm", "md"):
        return list(spec.basis.names)
    return [f"param_{i}" for i in range(size)]


@dataclass
class BootstrapResult:
    replicates: pd.DataFrame
    se: np.ndarray
    failures: int

    def to_dict(self) -> dict:
        return {
            "draws": int(len(self.replicates)),
            "failures": int(self.failures),
            "se": dict(zip(self.replicates.columns, map(float, self.se))),
        }


def bootstrap_se(
    spec: ParamModelSpec,
    data: SampleCounts,
    estimator: Estimator = "mm",
    n_boot: int = config.BOOTSTRAP_DRAWS,
    seed: int = 0,
    jobs: int = 1,
    source: Optional[Matching] = None,
) -> BootstrapResult:
    """
    Resample data.H households over all cells of the empirical matching (or `source`),
    re-estimate on each draw, and return the replicate matrix with per-parameter SDs.
    """
    fit = estimator_function(spec, estimator)
    source = source if source is not None else data.matching()
    logger.info(f"Bootstrapping {estimator if isinstance(estimator, str) else 'custom'} estimator: {n_boot} draws")

    def job(index, child_seed):
        counts = sample_households(source, data.H, child_seed)
        counts = SampleCounts(counts.muhat, counts.muhat_x0, counts.muhat_0y, data.labels_x, data.labels_y)
        return fit(counts)

    results = run_replicates(job, n_boot, seed, jobs)
    kept = [result for result in results if result is not None]
    matrix = np.vstack(kept)
    columns = parameter_names(spec, estimator, matrix.shape[1])
    replicates = pd.DataFrame(matrix, columns=columns)
    replicates.index = [i for i, result in enumerate(results) if result is not None]
    replicates.index.name = "replicate"
    se = matrix.std(axis=0, ddof=1) if matrix.shape[0] > 1 else np.zeros(matrix.shape[1])
    return BootstrapResult(replicates, se, len(results) - len(kept))
