"""simulate: synthetic market, its stable matching and a household sample."""
import logging

from cli.router import Router, RunContext, argument
from cli.utils import load_market_models, require_out
from market.io import write_market
from services.options import SolveOptions
from services.simulation import gen_benchmark, simulate_sample

logger = logging.getLogger(__name__)

router = Router("simulate")


@router.command("simulate", help="generate a market and sample households from its stable matching")
@argument("--size", type=int, required=True, help="number of groups on each side")
@argument("--households", type=int, default=10000, help="number of households to sample")
@argument("--model-men", default=None, help="choice model JSON for men (default: logit)")
@argument("--model-women", default=None, help="choice model JSON for women (default: logit)")
@argument("--model", default=None, help="one JSON for both sides, or {\"men\": ..., \"women\": ...}")
def cmd_simulate(context: RunContext) -> dict:
    args = context.args
    out = require_out(context)
    seed = context.seed or 0
    instance = gen_benchmark(args.size, seed)
    men, women = load_market_models(args.model, args.size, args.size, args.model_men, args.model_women)
    equilibrium, counts = simulate_sample(
        men, women, instance.phi, instance.margins, args.households, seed + 1, SolveOptions(jobs=context.jobs)
    )
    write_market(out, instance.margins, instance.phi, equilibrium.matching, counts)
    logger.info(f"simulate: size {args.size}, {args.households} households, seed {seed}")
    return {
        "size": args.size,
        "seed": seed,
        "households": int(counts.H),
        "solve": equilibrium.report.to_dict(timings=context.timings),
    }
