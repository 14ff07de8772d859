"""Shared fixtures: small markets and a command-line runner."""
import json

import numpy as np
import pytest

from choice.logit import LogitSpec
from cli import build_dispatcher
from market.models import Margins, SurplusMatrix
from services.options import SolveOptions


@pytest.fixture
def logit():
    return LogitSpec()


@pytest.fixture
def small_market():
    """2 x 3 market with unbalanced margins."""
    r = Margins([1.0, 2.0], [0.5, 1.5, 1.0])
    phi = SurplusMatrix([[1.0, -0.5, 0.3], [0.2, 0.8, -1.0]])
    return r, phi


@pytest.fixture
def logit_sides(small_market, logit):
    r, _ = small_market
    return [logit] * r.nx, [logit] * r.ny


@pytest.fixture
def tight_opts():
    return SolveOptions(tol=1e-10, max_iter=100000)


@pytest.fixture
def run_cli(tmp_path):
    """Run one subcommand into a fresh output directory; returns (exit code, report)."""

    def run(*argv, out=None):
        out = out or tmp_path / "out"
        code = build_dispatcher().dispatch([*map(str, argv), "--out", str(out)])
        report_path = out / "report.json"
        report = json.loads(report_path.read_text(encoding="utf-8")) if report_path.exists() else None
        return code, report

    return run


def random_market(nx, ny, seed):
    rng = np.random.default_rng(seed)
    r = Margins(rng.uniform(1.0, 3.0, nx), rng.uniform(1.0, 3.0, ny))
    return r, SurplusMatrix(rng.normal(size=(nx, ny)))
