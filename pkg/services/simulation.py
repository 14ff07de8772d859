"""Synthetic benchmark markets and household sampling."""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.special import ndtri

from choice.base import ChoiceModel
from market.errors import ConvergenceError, ParameterError, ValidationError
from market.models import Margins, Matching, SampleCounts, SurplusMatrix
from services.equilibrium import solve
from services.options import Equilibrium, SolveOptions

logger = logging.getLogger(__name__)


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator with explicit 64-bit seeding."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True, eq=False)
class BenchmarkInstance:
    size: int
    seed: int
    margins: Margins
    phi: SurplusMatrix


def gen_benchmark(size: int, seed: int) -> BenchmarkInstance:
    """
    Square market with n_x, m_y uniform on {1, ..., 100} and Phi_xy / 2 standard normal.

    Normals come from the inverse CDF of uniforms so the stream is fixed by the seed.
    """
    if int(size) < 1:
        raise ParameterError(f"benchmark size must be at least 1, got {size}")
    size = int(size)
    rng = make_rng(seed)
    n = rng.integers(1, 101, size=size).astype(float)
    m = rng.integers(1, 101, size=size).astype(float)
    uniforms = np.clip(rng.random((size, size)), np.finfo(float).tiny, None)
    phi = 2.0 * ndtri(uniforms)
    return BenchmarkInstance(size, int(seed), Margins(n, m), SurplusMatrix(phi))


def sample_households(mu: Matching, H: int, seed) -> SampleCounts:
    """
    Multinomial draw of H households over all cells (couples x-major, then single
    men, then single women) by sequential conditional binomials.
    """
    if int(H) < 1:
        raise ParameterError(f"number of households must be at least 1, got {H}")
    cells = mu.cells()
    total = cells.sum()
    if total <= 0:
        raise ValidationError("cannot sample households from an empty matching")
    p = cells / total
    rng = make_rng(seed)
    counts = np.zeros(p.size, dtype=np.int64)
    remaining = int(H)
    rest = 1.0
    last = int(np.flatnonzero(p > 0)[-1])
    for i, share in enumerate(p[:last]):
        if remaining == 0:
            break
        if share > 0 and rest > 0:
            counts[i] = rng.binomial(remaining, min(1.0, share / rest))
            remaining -= counts[i]
        rest -= share
    counts[last] += remaining
    return SampleCounts.from_cells(counts, mu.shape)


def simulate_sample(
    men: Sequence[ChoiceModel],
    women: Sequence[ChoiceModel],
    phi: SurplusMatrix,
    r: Margins,
    H: int,
    seed,
    opts: SolveOptions = None,
) -> Tuple[Equilibrium, SampleCounts]:
    """Solve the market, then draw H households from the stable matching."""
    equilibrium = solve(men, women, phi, r, opts)
    if not equilibrium.report.converged:
        raise ConvergenceError(
            f"equilibrium did not converge before sampling (residual {equilibrium.report.final_residual:.3e})"
        )
    counts = sample_households(equilibrium.matching, H, seed)
    logger.info(f"Sampled {H} households over {counts.cells().size} cells")
    return equilibrium, counts
