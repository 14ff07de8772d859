"""Model selection over polynomial surplus bases ranked by BIC."""
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from config import config
from estimation.basis import polynomial_basis
from estimation.mle import mle
from estimation.moment_matching import moment_match
from estimation.spec import heteroskedastic_spec, logit_spec
from market.errors import CupidError, ParameterError
from market.models import SampleCounts

logger = logging.getLogger(__name__)

COLUMNS = ["degree_x", "degree_y", "dim", "loglik", "aic", "bic", "converged", "error"]


def select_models(
    data: SampleCounts,
    labels_x: Optional[Sequence[float]] = None,
    labels_y: Optional[Sequence[float]] = None,
    max_degree_x: int = None,
    max_degree_y: int = None,
    heterogeneity: str = "logit",
    jobs: int = 1,
) -> pd.DataFrame:
    """
    Fit every polynomial basis x^p y^q with p <= max_degree_x, q <= max_degree_y and
    rank the fits by BIC. Logit models use moment matching, heteroskedastic ones MLE.
    """
    nx, ny = data.shape
    labels_x = np.arange(nx) if labels_x is None else labels_x
    labels_y = np.arange(ny) if labels_y is None else labels_y
    max_x = config.SELECTION_MAX_DEGREE_X if max_degree_x is None else max_degree_x
    max_y = config.SELECTION_MAX_DEGREE_Y if max_degree_y is None else max_degree_y
    max_x, max_y = min(max_x, nx - 1), min(max_y, ny - 1)
    if heterogeneity not in ("logit", "heteroskedastic"):
        raise ParameterError(f"unknown heterogeneity '{heterogeneity}' for model selection")
    grid = list(itertools.product(range(max_x + 1), range(max_y + 1)))
    logger.info(f"Model selection over {len(grid)} polynomial bases ({heterogeneity})")

    def fit(degrees):
        p, q = degrees
        row = {"degree_x": p, "degree_y": q}
        try:
            basis = polynomial_basis(labels_x, labels_y, p, q)
            if heterogeneity == "logit":
                result = moment_match(logit_spec(basis), data, compute_se=False)
            else:
                result = mle(heteroskedastic_spec(basis, labels_x, labels_y), data, compute_se=False)
            row.update(dim=result.dim, loglik=result.loglik, aic=result.aic, bic=result.bic,
                       converged=result.converged, error="")
        except CupidError as e:
            logger.error(f"Model selection fit ({p}, {q}) failed: {e}")
            row.update(dim=np.nan, loglik=np.nan, aic=np.nan, bic=np.nan, converged=False, error=str(e))
        return row

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(fit, grid))
    else:
        rows = [fit(degrees) for degrees in grid]

    frame = pd.DataFrame(rows, columns=COLUMNS)
    frame = frame.sort_values(["bic", "degree_x", "degree_y"], na_position="last").reset_index(drop=True)
    frame.insert(0, "rank", np.arange(1, len(frame) + 1))
    return frame
