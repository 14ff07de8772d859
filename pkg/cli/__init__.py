"""Command-line package initialization."""
from cli.router import Dispatcher
from cli.handlers import solve, identify, estimate, simulate, bench


def build_dispatcher() -> Dispatcher:
    """Dispatcher with every subcommand router registered."""
    dp = Dispatcher()
    dp.include_router(solve.router)
    dp.include_router(identify.router)
    dp.include_router(estimate.router)
    dp.include_router(simulate.router)
    dp.include_router(bench.router)
    return dp


__all__ = ["Dispatcher", "build_dispatcher"]
