"""identify: surplus and utilities from an observed matching."""
import logging

import numpy as np

from choice.logit import logit_scale
from cli.router import Router, RunContext, argument
from cli.utils import load_market_models, require_out
from market.errors import DimensionError
from market.io import read_margins, read_matching, write_group_utilities, write_matrix, write_surplus
from services.identification import identify_surplus, identify_utilities, surplus_share

logger = logging.getLogger(__name__)

router = Router("identify")


@router.command("identify", help="identify surplus and utilities from a matching")
@argument("--matching", required=True, help="matching CSV (x, y, mass); -1 marks singles")
@argument("--margins", default=None, help="margins CSV; defaults to the margins implied by the matching")
@argument("--model-men", default=None, help="choice model JSON for men (default: logit)")
@argument("--model-women", default=None, help="choice model JSON for women (default: logit)")
@argument("--model", default=None, help="one JSON for both sides, or {\"men\": ..., \"women\": ...}")
@argument("--smoothing", type=float, default=0.0, help="pseudo-count added to every cell")
def cmd_identify(context: RunContext) -> dict:
    args = context.args
    out = require_out(context)
    margins = read_margins(args.margins) if args.margins else None
    mu = read_matching(args.matching, margins.shape if margins is not None else None)
    if margins is None:
        margins = mu.margins()
    elif mu.shape != margins.shape:
        raise DimensionError("matching", margins.shape, mu.shape)
    men, women = load_market_models(args.model, margins.nx, margins.ny, args.model_men, args.model_women)

    phi = identify_surplus(men, women, mu, margins, smoothing=args.smoothing)
    forbidden = phi.forbidden if phi.has_forbidden else None
    systematic, utilities = identify_utilities(men, women, mu, margins, forbidden, smoothing=args.smoothing)
    write_surplus(phi, out)
    write_matrix(systematic.U, out, "U.csv")
    write_matrix(systematic.V, out, "V.csv")
    write_group_utilities(utilities.u, utilities.v, out)

    report = {"shape": list(margins.shape), "forbidden_cells": int(phi.forbidden.sum())}
    if all(logit_scale(m) is not None for m in list(men) + list(women)) and args.smoothing == 0:
        share = surplus_share(men, women, mu, margins)
        write_matrix(share, out, "shares.csv", column="share")
        report["mean_surplus_share"] = float(np.nanmean(share)) if np.isfinite(share).any() else None
    logger.info(f"identify: {margins.nx}x{margins.ny}, {report['forbidden_cells']} forbidden cells")
    return report
