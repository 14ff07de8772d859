"""estimate and test: parametric estimation and the entropy specification test."""
import logging

import pandas as pd

from cli.router import Router, RunContext, argument
from cli.utils import parameter_table, parse_float_list, read_json, require_out
from config import config
from estimation.bootstrap import bootstrap_se
from estimation.min_distance import min_distance
from estimation.mle import mle, profile_likelihood
from estimation.moment_matching import moment_match
from estimation.selection import select_models
from estimation.spec import spec_from_dict
from estimation.spec_test import entropy_spec_test
from market.errors import DimensionError, ParameterError
from market.io import read_counts, read_margins, write_frame, write_json

logger = logging.getLogger(__name__)

router = Router("estimate")

ESTIMATORS = ("mm", "mle", "md")


def _load(context: RunContext):
    """Counts, checked against the margins file when one is given, and the model spec."""
    args = context.args
    margins = read_margins(args.margins) if args.margins else None
    data = read_counts(args.data)
    if margins is not None and data.shape != margins.shape:
        raise DimensionError("counts", margins.shape, data.shape)
    doc = read_json(args.spec) if args.spec else {}
    spec = spec_from_dict(doc, data.shape, doc.get("labels_x"), doc.get("labels_y"))
    return data, spec, doc


@router.command("estimate", help="estimate a parametric matching model from household counts")
@argument("--data", required=True, help="counts CSV (x, y, count); -1 marks singles")
@argument("--margins", default=None, help="margins CSV checked against the counts")
@argument("--spec", default=None, help="estimation spec JSON (default: logit, full indicator basis)")
@argument("--estimator", default="mm", choices=ESTIMATORS)
@argument("--weighting", default="efficient", choices=("efficient", "identity"), help="minimum distance weighting")
@argument("--boot", type=int, default=0, help="bootstrap draws for standard errors (0 = plug-in)")
@argument("--select", action="store_true", help="also rank polynomial bases by BIC")
@argument("--profile", default=None, help="parameter name for a profile likelihood")
@argument("--grid", default=None, help="comma-separated profile grid")
def cmd_estimate(context: RunContext) -> dict:
    args = context.args
    out = require_out(context)
    data, spec, doc = _load(context)
    if args.boot < 0:
        raise ParameterError(f"--boot must be non-negative, got {args.boot}")

    if args.estimator == "mm":
        result = moment_match(spec, data)
    elif args.estimator == "mle":
        result = mle(spec, data)
    else:
        result = min_distance(spec, data, args.weighting)

    names = list(result.parameter_names)
    payload = result.to_dict()
    if args.boot > 0:
        boot = bootstrap_se(spec, data, args.estimator, args.boot, context.seed or 0, context.jobs)
        write_frame(boot.replicates.reset_index(), out / "bootstrap.csv")
        payload["bootstrap"] = boot.to_dict()
        payload["se"] = [float(s) for s in boot.se]
        result.se = boot.se
    values = result.params if len(names) == result.params.size else result.lam
    payload["parameters"] = parameter_table(names, values, result.se)
    write_json(payload, out / "estimates.json")

    comoments = pd.DataFrame(
        {
            "basis": list(spec.basis.names),
            "observed": result.observed_comoments,
            "predicted": result.comoments,
        }
    )
    write_frame(comoments, out / "comoments.csv")

    if args.profile:
        if not args.grid:
            raise ParameterError("--profile needs --grid")
        frame = profile_likelihood(spec, data, args.profile, parse_float_list(args.grid, "--grid"))
        write_frame(frame, out / "profile.csv")

    if args.select:
        labels_x, labels_y = doc.get("labels_x"), doc.get("labels_y")
        hetero = doc.get("heterogeneity", {}).get("kind", "logit")
        selection = select_models(
            data, labels_x, labels_y,
            heterogeneity="heteroskedastic" if hetero == "heteroskedastic" else "logit",
            jobs=context.jobs,
        )
        write_frame(selection, out / "selection.csv")
        best = selection.iloc[0]
        payload["selection_best"] = {"degree_x": int(best["degree_x"]), "degree_y": int(best["degree_y"])}

    logger.info(f"estimate ({args.estimator}): loglik={result.loglik:.6g}, converged={result.converged}")
    return {
        "estimator": args.estimator,
        "converged": result.converged,
        "loglik": float(result.loglik),
        "n_obs": int(data.H),
    }


@router.command("test", help="entropy specification test with a bootstrap p-value")
@argument("--data", required=True, help="counts CSV (x, y, count)")
@argument("--margins", default=None, help="margins CSV checked against the counts")
@argument("--spec", default=None, help="estimation spec JSON")
@argument("--boot", type=int, default=config.BOOTSTRAP_DRAWS, help="bootstrap draws")
def cmd_test(context: RunContext) -> dict:
    args = context.args
    out = require_out(context)
    data, spec, _ = _load(context)
    result = entropy_spec_test(spec, data, args.boot, context.seed or 0, context.jobs)
    payload = result.to_dict()
    write_json(payload, out / "test.json")
    write_frame(result.replicates_frame(), out / "replicates.csv")
    logger.info(f"test: statistic={result.statistic:.6g}, p={result.p_value:.4f}")
    return {
        "statistic": float(result.statistic),
        "p_value": float(result.p_value),
        "converged": bool(result.fit.converged),
        "failures": int(result.failures),
    }
