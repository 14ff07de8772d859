"""Database engine and session management."""
import logging
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from config import config

logger = logging.getLogger(__name__)

# Engine for the configured ledger (in-memory when no ledger file is set)
engine = create_engine(
    config.database_url,
    echo=False,  # Set to True for SQL logging
    future=True,
)

session_factory = sessionmaker(
    engine,
    expire_on_commit=False,
)


def use_database(url: str) -> None:
    """Rebind the engine and session factory to another database URL."""
    global engine
    engine.dispose()
    engine = create_engine(url, echo=False, future=True)
    session_factory.configure(bind=engine)
    logger.debug(f"Run ledger bound to {url}")


def init_db():
    """Initialize database (create tables)."""
    from .models import Base
    Base.metadata.create_all(engine)
