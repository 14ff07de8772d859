"""CSV readers and writers for market artifacts (long format, UTF-8, header row required)."""
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd

from market.errors import DimensionError, ParseError
from market.models import Margins, Matching, SampleCounts, SurplusMatrix

logger = logging.getLogger(__name__)

SINGLE = -1


def atomic_write_text(path, text: str) -> Path:
    """Write text to a temp file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_frame(df: pd.DataFrame, path) -> Path:
    return atomic_write_text(path, df.to_csv(index=False, float_format="%.17g"))


def write_json(payload: dict, path) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_frame(path, columns: Iterable[str]) -> pd.DataFrame:
    """Read a CSV and check its header."""
    columns = list(columns)
    path = Path(path)
    try:
        df = pd.read_csv(path, encoding="utf-8", skipinitialspace=True)
    except FileNotFoundError:
        raise ParseError(path, "file not found")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(path, f"cannot parse CSV ({e})")
    df.columns = [str(c).strip() for c in df.columns]
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ParseError(path, f"missing header (expected columns {columns}, got {list(df.columns)})", line=1)
    for col in columns:
        values = pd.to_numeric(df[col], errors="coerce")
        bad = np.flatnonzero(values.isna().to_numpy())
        if bad.size:
            # line numbers count the header as line 1
            raise ParseError(path, f"non-numeric value in column '{col}'", line=int(bad[0]) + 2)
        df[col] = values
    return df


def _check_non_negative(df: pd.DataFrame, col: str, path) -> None:
    bad = np.flatnonzero(df[col].to_numpy() < 0)
    if bad.size:
        raise ParseError(path, f"negative {col} in row {int(bad[0])}", line=int(bad[0]) + 2)


def _check_index(df: pd.DataFrame, col: str, size: int, path, allow_single: bool) -> None:
    values = df[col].to_numpy()
    lo = SINGLE if allow_single else 0
    bad = np.flatnonzero((values < lo) | (values >= size) | (values != np.round(values)))
    if bad.size:
        raise ParseError(path, f"invalid group index {values[bad[0]]} in column '{col}'", line=int(bad[0]) + 2)


# ---------------------------------------------------------------- margins

def write_margins(r: Margins, directory, name: str = "margins.csv") -> Path:
    """Write margins as rows (sex, group, mass); sex is 'm' for men and 'f' for women."""
    df = pd.DataFrame(
        {
            "sex": ["m"] * r.nx + ["f"] * r.ny,
            "group": list(range(r.nx)) + list(range(r.ny)),
            "mass": np.concatenate([r.n, r.m]),
        }
    )
    return write_frame(df, Path(directory) / name)


def read_margins(path) -> Margins:
    df = _read_frame(path, ["group", "mass"])
    if "sex" not in df.columns:
        raise ParseError(path, "missing header column 'sex'", line=1)
    _check_non_negative(df, "mass", path)
    sex = df["sex"].astype(str).str.strip().str.lower()
    bad = np.flatnonzero(~sex.isin(["m", "f"]).to_numpy())
    if bad.size:
        raise ParseError(path, f"sex must be 'm' or 'f', got '{sex.iloc[bad[0]]}'", line=int(bad[0]) + 2)
    out = []
    for code in ("m", "f"):
        part = df[sex == code].sort_values("group")
        groups = part["group"].to_numpy()
        if not np.array_equal(groups, np.arange(groups.size)):
            raise ParseError(path, f"groups for sex '{code}' must be 0..K-1 without gaps")
        out.append(part["mass"].to_numpy(dtype=float))
    return Margins(out[0], out[1])


# ---------------------------------------------------------------- matching

def matching_frame(mu: Matching) -> pd.DataFrame:
    nx, ny = mu.shape
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    return pd.DataFrame(
        {
            "x": np.concatenate([xs.ravel(), np.arange(nx), np.full(ny, SINGLE)]),
            "y": np.concatenate([ys.ravel(), np.full(nx, SINGLE), np.arange(ny)]),
            "mass": mu.cells(),
        }
    )


def write_matching(mu: Matching, directory, name: str = "matching.csv") -> Path:
    return write_frame(matching_frame(mu), Path(directory) / name)


def _long_to_arrays(df: pd.DataFrame, value: str, shape: Tuple[int, int], path):
    nx, ny = shape
    _check_index(df, "x", nx, path, allow_single=True)
    _check_index(df, "y", ny, path, allow_single=True)
    both_single = np.flatnonzero(((df["x"] == SINGLE) & (df["y"] == SINGLE)).to_numpy())
    if both_single.size:
        raise ParseError(path, "row with x=-1 and y=-1", line=int(both_single[0]) + 2)
    mu = np.zeros((nx, ny))
    mu_x0 = np.zeros(nx)
    mu_0y = np.zeros(ny)
    for x, y, mass in df[["x", "y", value]].itertuples(index=False):
        x, y = int(x), int(y)
        if y == SINGLE:
            mu_x0[x] += mass
        elif x == SINGLE:
            mu_0y[y] += mass
        else:
            mu[x, y] += mass
    return mu, mu_x0, mu_0y


def _infer_shape(df: pd.DataFrame, shape: Optional[Tuple[int, int]]) -> Tuple[int, int]:
    if shape is not None:
        return shape
    return int(df["x"].max()) + 1, int(df["y"].max()) + 1


def read_matching(path, shape: Optional[Tuple[int, int]] = None) -> Matching:
    df = _read_frame(path, ["x", "y", "mass"])
    _check_non_negative(df, "mass", path)
    return Matching(*_long_to_arrays(df, "mass", _infer_shape(df, shape), path))


# ---------------------------------------------------------------- counts

def write_counts(data: SampleCounts, directory, name: str = "counts.csv") -> Path:
    mu = Matching(data.muhat, data.muhat_x0, data.muhat_0y)
    df = matching_frame(mu).rename(columns={"mass": "count"})
    df["count"] = data.cells()
    return write_frame(df, Path(directory) / name)


def read_counts(path, shape: Optional[Tuple[int, int]] = None) -> SampleCounts:
    df = _read_frame(path, ["x", "y", "count"])
    _check_non_negative(df, "count", path)
    bad = np.flatnonzero(df["count"].to_numpy() != np.round(df["count"].to_numpy()))
    if bad.size:
        raise ParseError(path, "counts must be integers", line=int(bad[0]) + 2)
    mu, mu_x0, mu_0y = _long_to_arrays(df, "count", _infer_shape(df, shape), path)
    return SampleCounts(mu.astype(np.int64), mu_x0.astype(np.int64), mu_0y.astype(np.int64))


# ---------------------------------------------------------------- surplus

def write_surplus(phi: SurplusMatrix, directory, name: str = "phi.csv") -> Path:
    nx, ny = phi.shape
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    df = pd.DataFrame(
        {
            "x": xs.ravel(),
            "y": ys.ravel(),
            "value": phi.filled(0.0).ravel(),
            "forbidden": phi.forbidden.ravel().astype(int),
        }
    )
    return write_frame(df, Path(directory) / name)


def read_surplus(path, shape: Optional[Tuple[int, int]] = None) -> SurplusMatrix:
    df = _read_frame(path, ["x", "y", "value"])
    shape = _infer_shape(df, shape)
    _check_index(df, "x", shape[0], path, allow_single=False)
    _check_index(df, "y", shape[1], path, allow_single=False)
    phi = np.full(shape, np.nan)
    forbidden = np.zeros(shape, dtype=bool)
    flags = df["forbidden"].to_numpy() if "forbidden" in df.columns else np.zeros(len(df))
    for (x, y, value), flag in zip(df[["x", "y", "value"]].itertuples(index=False), flags):
        phi[int(x), int(y)] = value
        forbidden[int(x), int(y)] = bool(flag)
    missing = np.argwhere(np.isnan(phi) & ~forbidden)
    if missing.size:
        raise ParseError(path, f"no surplus value for cell {tuple(int(i) for i in missing[0])}")
    return SurplusMatrix(phi, forbidden)


# ---------------------------------------------------------------- utilities

def write_group_utilities(u: np.ndarray, v: np.ndarray, directory, name: str = "utilities.csv") -> Path:
    df = pd.DataFrame(
        {
            "sex": ["m"] * len(u) + ["f"] * len(v),
            "group": list(range(len(u))) + list(range(len(v))),
            "utility": np.concatenate([u, v]),
        }
    )
    return write_frame(df, Path(directory) / name)


def write_matrix(values: np.ndarray, directory, name: str, column: str = "value") -> Path:
    nx, ny = values.shape
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    df = pd.DataFrame({"x": xs.ravel(), "y": ys.ravel(), column: values.ravel()})
    return write_frame(df, Path(directory) / name)


# ---------------------------------------------------------------- whole market

def write_market(
    directory,
    margins: Optional[Margins] = None,
    phi: Optional[SurplusMatrix] = None,
    matching: Optional[Matching] = None,
    counts: Optional[SampleCounts] = None,
) -> list:
    """Write whichever market artifacts are given; returns the written paths."""
    written = []
    if margins is not None:
        written.append(write_margins(margins, directory))
    if phi is not None:
        written.append(write_surplus(phi, directory))
    if matching is not None:
        written.append(write_matching(matching, directory))
    if counts is not None:
        written.append(write_counts(counts, directory))
    logger.debug(f"Wrote {len(written)} market files to {directory}")
    return written


def read_market(directory) -> dict:
    """Read every market artifact present in a directory written by write_market."""
    directory = Path(directory)
    out = {}
    if (directory / "margins.csv").exists():
        out["margins"] = read_margins(directory / "margins.csv")
    shape = out["margins"].shape if "margins" in out else None
    if (directory / "phi.csv").exists():
        out["phi"] = read_surplus(directory / "phi.csv", shape)
    if (directory / "matching.csv").exists():
        out["matching"] = read_matching(directory / "matching.csv", shape)
    if (directory / "counts.csv").exists():
        out["counts"] = read_counts(directory / "counts.csv", shape)
    for key in ("phi", "matching", "counts"):
        if shape is not None and key in out and out[key].shape != shape:
            raise DimensionError(key, shape, out[key].shape)
    return out
