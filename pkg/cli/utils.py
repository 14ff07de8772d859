"""Helpers shared by the command handlers."""
import json
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from choice.base import ChoiceModel
from choice.logit import LogitSpec
from choice.registry import load_models, models_from_document
from cli.router import RunContext
from market.errors import ParameterError, ParseError


def require_out(context: RunContext) -> Path:
    """Output directory; every file-producing command needs --out."""
    if context.out is None:
        raise ParameterError(f"--out is required for {context.args.command}")
    context.out.mkdir(parents=True, exist_ok=True)
    return context.out


def read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError(path, "file not found")
    except json.JSONDecodeError as e:
        raise ParseError(path, f"invalid JSON ({e.msg})", line=e.lineno)


def load_market_models(
    path: Optional[str], nx: int, ny: int, men_path: Optional[str] = None, women_path: Optional[str] = None
) -> Tuple[List[ChoiceModel], List[ChoiceModel]]:
    """
    Models for both sides from {"men": doc, "women": doc}, or one document shared by
    both sides. A per-side file replaces that side of the shared document. Sides
    with no model at all are logit.
    """
    men, women = [LogitSpec()] * nx, [LogitSpec()] * ny
    if path is not None:
        doc = read_json(path)
        base_dir = Path(path).parent
        if isinstance(doc, dict) and ("men" in doc or "women" in doc):
            men = models_from_document(doc.get("men", {"family": "logit"}), nx, base_dir)
            women = models_from_document(doc.get("women", {"family": "logit"}), ny, base_dir)
        else:
            men, women = models_from_document(doc, nx, base_dir), models_from_document(doc, ny, base_dir)
    if men_path is not None:
        men = load_models(men_path, nx)
    if women_path is not None:
        women = load_models(women_path, ny)
    return men, women


def parse_int_list(text: str, name: str) -> List[int]:
    try:
        values = [int(item) for item in str(text).split(",") if item.strip()]
    except ValueError:
        raise ParameterError(f"{name} must be a comma-separated list of integers, got '{text}'")
    return values


def parse_float_list(text: str, name: str) -> List[float]:
    try:
        return [float(item) for item in str(text).split(",") if item.strip()]
    except ValueError:
        raise ParameterError(f"{name} must be a comma-separated list of numbers, got '{text}'")


def parameter_table(names: Sequence[str], values, se) -> dict:
    """{name: {"estimate": value, "se": se}} with non-finite numbers as null."""
    def clean(value):
        value = float(value)
        return value if np.isfinite(value) else None

    return {name: {"estimate": clean(v), "se": clean(s)} for name, v, s in zip(names, values, se)}
