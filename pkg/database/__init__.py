"""Database package initialization."""
from .models import Base, Run, BenchRecord, RunStatus
from .engine import session_factory, init_db, use_database

__all__ = ["Base", "Run", "BenchRecord", "RunStatus", "session_factory", "init_db", "use_database"]
