"""JSON documents for choice models, one model per group or one shared by all groups."""
import json
import logging
from pathlib import Path
from typing import List, Union

from choice.base import ChoiceModel
from choice.gev import FcMnlSpec, GevSpec, generator_from_dict
from choice.logit import LogitSpec, NestedLogitSpec, ScaledModel
from choice.rc_logit import RcLogitSpec
from choice.transport import DiscretizedDistribution
from market.errors import DimensionError, ParseError, UnsupportedModelError, ValidationError

logger = logging.getLogger(__name__)

FAMILIES = ("logit", "nested_logit", "scaled", "gev", "fcmnl", "discretized", "rc_logit")


def model_from_dict(doc: dict, base_dir: Union[str, Path, None] = None) -> ChoiceModel:
    """Build a model from its JSON description."""
    if not isinstance(doc, dict) or "family" not in doc:
        raise ValidationError("model document must be an object with a 'family' field")
    family = doc["family"]
    try:
        if family == "logit":
            return LogitSpec()
        if family == "nested_logit":
            return NestedLogitSpec(doc["nests"], doc["lambdas"])
        if family == "scaled":
            return ScaledModel(model_from_dict(doc["base"], base_dir), doc["scale"])
        if family == "gev":
            return GevSpec(generator_from_dict(doc["generator"]), doc["n_options"])
        if family == "fcmnl":
            return FcMnlSpec(doc["b"], doc["sigma"], doc["tau"])
        if family == "discretized":
            if "csv" in doc:
                path = Path(doc["csv"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                return DiscretizedDistribution.from_csv(path)
            return DiscretizedDistribution(doc["support"], doc.get("weights"))
        if family == "rc_logit":
            draws = model_from_dict(doc["e_draws"], base_dir)
            return RcLogitSpec(doc["Z"], draws, doc.get("T", 1.0))
    except KeyError as e:
        raise ValidationError(f"model of family '{family}' is missing field {e}")
    raise UnsupportedModelError(f"unknown model family '{family}' (expected one of {', '.join(FAMILIES)})")


def model_to_dict(model: ChoiceModel) -> dict:
    return model.to_dict()


def models_from_document(doc, count: int, base_dir=None) -> List[ChoiceModel]:
    """
    Per-group models from a document that is either a single model (shared by
    all groups) or {"groups": [model, ...]} with one entry per group.
    """
    if isinstance(doc, dict) and "groups" in doc:
        groups = doc["groups"]
        if len(groups) != count:
            raise DimensionError("model groups", count, len(groups))
        return [model_from_dict(item, base_dir) for item in groups]
    if isinstance(doc, list):
        if len(doc) != count:
            raise DimensionError("model groups", count, len(doc))
        return [model_from_dict(item, base_dir) for item in doc]
    model = model_from_dict(doc, base_dir)
    return [model] * count


def load_models(path, count: int) -> List[ChoiceModel]:
    """Read a model JSON file for a side of the market with count groups."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError(path, "file not found")
    except json.JSONDecodeError as e:
        raise ParseError(path, f"invalid JSON ({e.msg})", line=e.lineno)
    models = models_from_document(doc, count, base_dir=path.parent)
    logger.debug(f"Loaded {count} models from {path}: {models[0]!r}")
    return models


def models_to_document(models: List[ChoiceModel]) -> dict:
    if all(model is models[0] for model in models):
        return models[0].to_dict()
    return {"groups": [model.to_dict() for model in models]}
