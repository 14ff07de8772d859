"""Configuration settings for the cupid matching toolkit."""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load .env file if it exists (for local development)
# override=False ensures that existing environment variables take precedence
load_dotenv(override=False)

# Project root directory
BASE_DIR = Path(__file__).parent


class Config:
    """Toolkit configuration class."""

    # Logging
    LOG_LEVEL = os.getenv("CUPID_LOG", "INFO").upper()

    # Run ledger (SQLite - local file, empty disables it)
    LEDGER_FILE = os.getenv("CUPID_LEDGER", "")

    @property
    def database_url(self) -> str:
        """Get SQLite connection URL for the run ledger."""
        if not self.LEDGER_FILE:
            return "sqlite://"
        path = Path(self.LEDGER_FILE)
        if not path.is_absolute():
            path = Path.cwd() / path
        return f"sqlite:///{path}"

    # Solver settings
    FEASIBILITY_TOL = float(os.getenv("CUPID_TOL", "1e-9"))
    MAX_ITER = int(os.getenv("CUPID_MAX_ITER", "10000"))
    LP_DENSE_LIMIT = int(float(os.getenv("CUPID_LP_DENSE_LIMIT", "1e6")))  # K * |Y0| entries
    JOBS = int(os.getenv("CUPID_JOBS", "1"))

    # Estimation
    FD_STEP = float(os.getenv("CUPID_FD_STEP", "1e-5"))
    BOOTSTRAP_DRAWS = int(os.getenv("CUPID_BOOTSTRAP_DRAWS", "999"))
    MAX_BOOTSTRAP_FAILURE_RATE = 0.05
    EIGENVALUE_GUARD = float(os.getenv("CUPID_EIGENVALUE_GUARD", "1e-10"))

    # Model-selection grid: every (p, q) with p <= max_x and q <= max_y
    SELECTION_MAX_DEGREE_X = int(os.getenv("CUPID_SELECTION_MAX_DEGREE_X", "2"))
    SELECTION_MAX_DEGREE_Y = int(os.getenv("CUPID_SELECTION_MAX_DEGREE_Y", "2"))

    # Bench harness
    BENCH_REPEATS = int(os.getenv("CUPID_BENCH_REPEATS", "5"))
    BENCH_AGREEMENT_TOL = 1e-5

    # Reports
    SCHEMA_VERSION = 1


config = Config()
