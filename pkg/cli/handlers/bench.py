"""bench: solver timings and agreement on synthetic logit markets."""
import logging

from cli.router import Router, RunContext, argument
from cli.utils import parse_int_list, require_out
from config import config
from market.errors import ParameterError
from market.io import write_frame
from services.bench import run_bench
from services.options import Method

logger = logging.getLogger(__name__)

router = Router("bench")


@router.command("bench", help="time the equilibrium solvers on synthetic logit markets")
@argument("--sizes", default="100", help="comma-separated market sizes")
@argument("--seeds", default="0", help="comma-separated seeds")
@argument(
    "--methods",
    default=",".join(m.value for m in (Method.IPFP, Method.MINEMAX, Method.CHOOSIOW_F)),
    help="comma-separated methods",
)
@argument("--repeats", type=int, default=config.BENCH_REPEATS, help="timed repeats per cell")
def cmd_bench(context: RunContext) -> dict:
    args = context.args
    out = require_out(context)
    sizes = parse_int_list(args.sizes, "--sizes")
    seeds = parse_int_list(args.seeds, "--seeds")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ParameterError("--methods must name at least one method")
    if not sizes or not seeds:
        raise ParameterError("--sizes and --seeds must not be empty")

    report = run_bench(sizes, seeds, methods, args.repeats, context.jobs)
    records = report.records
    summary = report.summary
    if not (context.timings and report.timings):
        records = records.drop(columns=["median_time"])
        summary = summary.drop(columns=["median_time"])
    write_frame(records, out / "records.csv")
    write_frame(summary, out / "summary.csv")
    context.bench_rows = report.records.to_dict("records")

    payload = report.to_dict()
    payload["converged"] = bool(report.records["converged"].all()) and report.all_agree
    logger.info(f"bench: {payload['cells']} cells, {payload['failures']} failures")
    return payload
