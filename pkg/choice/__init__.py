from choice.base import ChoiceModel, NestedForm, check_models
from choice.gev import FcMnlSpec, GevSpec, Generator, NestedGenerator, SumGenerator, FcMnlGenerator
from choice.logit import LogitSpec, NestedLogitSpec, ScaledModel, heteroskedastic_logit
from choice.rc_logit import RcLogitSpec, conj_rc
from choice.registry import load_models, model_from_dict, models_from_document, models_to_document
from choice.transport import (
    DiscretizedDistribution,
    SimplexBackend,
    SinkhornBackend,
    TransportSolution,
    conj_ot,
)

__all__ = [
    "ChoiceModel",
    "NestedForm",
    "check_models",
    "LogitSpec",
    "NestedLogitSpec",
    "ScaledModel",
    "heteroskedastic_logit",
    "GevSpec",
    "Generator",
    "SumGenerator",
    "NestedGenerator",
    "FcMnlGenerator",
    "FcMnlSpec",
    "DiscretizedDistribution",
    "SimplexBackend",
    "SinkhornBackend",
    "TransportSolution",
    "conj_ot",
    "RcLogitSpec",
    "conj_rc",
    "load_models",
    "model_from_dict",
    "models_from_document",
    "models_to_document",
]
