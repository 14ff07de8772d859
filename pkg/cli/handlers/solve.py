"""solve: stable matching for given margins, surplus and heterogeneity."""
import logging

import pandas as pd

from cli.router import Router, RunContext, argument
from cli.utils import load_market_models, require_out
from config import config
from market.errors import DimensionError
from market.feasibility import max_residual
from market.io import read_margins, read_surplus, write_frame, write_group_utilities, write_matching, write_matrix
from services.equilibrium import solve
from services.options import Method, SolveOptions

logger = logging.getLogger(__name__)

router = Router("solve")


@router.command("solve", help="solve for the stable matching")
@argument("--margins", required=True, help="margins CSV (sex, group, mass)")
@argument("--phi", required=True, help="surplus CSV (x, y, value[, forbidden])")
@argument("--model-men", default=None, help="choice model JSON for men (default: logit)")
@argument("--model-women", default=None, help="choice model JSON for women (default: logit)")
@argument("--model", default=None, help="one JSON for both sides, or {\"men\": ..., \"women\": ...}")
@argument("--method", default=Method.IPFP.value, choices=[m.value for m in Method])
@argument("--tol", type=float, default=config.FEASIBILITY_TOL)
@argument("--max-iter", type=int, default=config.MAX_ITER)
@argument("--damping", type=float, default=1.0)
@argument("--trace", action="store_true", help="write the objective trace (logit IPFP)")
def cmd_solve(context: RunContext) -> dict:
    """Solve a market and write matching.csv and utilities.csv."""
    args = context.args
    out = require_out(context)
    margins = read_margins(args.margins)
    phi = read_surplus(args.phi, margins.shape)
    if phi.shape != margins.shape:
        raise DimensionError("phi", margins.shape, phi.shape)
    men, women = load_market_models(args.model, margins.nx, margins.ny, args.model_men, args.model_women)
    opts = SolveOptions(
        tol=args.tol,
        max_iter=args.max_iter,
        method=args.method,
        damping=args.damping,
        jobs=context.jobs,
        trace=args.trace,
    )
    equilibrium = solve(men, women, phi, margins, opts)

    write_matching(equilibrium.matching, out)
    write_group_utilities(equilibrium.utilities.u, equilibrium.utilities.v, out)
    if equilibrium.systematic is not None:
        write_matrix(equilibrium.systematic.U, out, "U.csv")
        write_matrix(equilibrium.systematic.V, out, "V.csv")
    if args.trace and equilibrium.report.objective_trace:
        trace = equilibrium.report.objective_trace
        write_frame(pd.DataFrame({"half_step": range(len(trace)), "objective": trace}), out / "trace.csv")

    report = equilibrium.report.to_dict(timings=context.timings)
    report["margin_residual"] = max_residual(equilibrium.matching, margins)
    logger.info(f"solve: {margins.nx}x{margins.ny} market, converged={report['converged']}")
    return report
