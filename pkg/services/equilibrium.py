"""Single entry point dispatching to the equilibrium solvers."""
import logging
from typing import Optional, Sequence

from choice.base import ChoiceModel
from market.errors import UnsupportedModelError
from market.models import Margins, Matching, SurplusMatrix
from services.choosiow import solve_F_choosiow
from services.ipfp import all_logit, solve_ipfp_general, solve_ipfp_logit
from services.lp_discrete import solve_lp_discrete
from services.minemax import minemax_utilities, solve_minemax
from services.options import Equilibrium, Method, SolveOptions

logger = logging.getLogger(__name__)


def solve(
    men: Sequence[ChoiceModel],
    women: Sequence[ChoiceModel],
    phi: SurplusMatrix,
    r: Margins,
    opts: SolveOptions = None,
    init: Optional[Matching] = None,
) -> Equilibrium:
    """Solve for the stable matching with the method named in opts."""
    opts = opts or SolveOptions()
    method = opts.method
    logger.debug(f"Solving {r.nx}x{r.ny} market with {method.value}")

    if method is Method.IPFP:
        if all_logit(men) and all_logit(women):
            matching, utilities, report = solve_ipfp_logit(phi, r, opts, init)
        else:
            matching, utilities, report = solve_ipfp_general(men, women, phi, r, opts, init)
        return Equilibrium(matching, utilities, report)

    if method is Method.MINEMAX:
        systematic, matching, report = solve_minemax(men, women, phi, r, opts)
        utilities = minemax_utilities(men, women, systematic, r, phi)
        return Equilibrium(matching, utilities, report, systematic)

    if method is Method.CHOOSIOW_F:
        if not (all_logit(men) and all_logit(women)):
            raise UnsupportedModelError("choosiow_f requires the standard logit model on both sides")
        utilities, matching, report = solve_F_choosiow(phi, r, opts)
        return Equilibrium(matching, utilities, report)

    if method is Method.LP_DISCRETE:
        matching, utilities, report = solve_lp_discrete(men, women, phi, r, opts)
        return Equilibrium(matching, utilities, report)

    raise UnsupportedModelError(f"no solver for method {method}")
