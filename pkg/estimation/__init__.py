from estimation.basis import BasisSet, constant_basis, indicator_basis, polynomial_basis
from estimation.bootstrap import bootstrap_se
from estimation.criteria import information_criteria
from estimation.likelihood import log_likelihood
from estimation.min_distance import min_distance
from estimation.mle import mle, profile_likelihood
from estimation.moment_matching import moment_match
from estimation.results import EstimationResult
from estimation.selection import select_models
from estimation.spec import (
    ParamModelSpec,
    fixed_models_spec,
    gender_spec,
    heteroskedastic_spec,
    logit_spec,
    spec_from_dict,
)
from estimation.spec_test import entropy_spec_test

__all__ = [
    "BasisSet",
    "EstimationResult",
    "ParamModelSpec",
    "bootstrap_se",
    "constant_basis",
    "entropy_spec_test",
    "fixed_models_spec",
    "gender_spec",
    "heteroskedastic_spec",
    "indicator_basis",
    "information_criteria",
    "log_likelihood",
    "logit_spec",
    "min_distance",
    "mle",
    "moment_match",
    "polynomial_basis",
    "profile_likelihood",
    "select_models",
    "spec_from_dict",
]
