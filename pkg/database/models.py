"""Database models for the run ledger."""
from datetime import datetime
from sqlalchemy import (
    String, Integer, Boolean, DateTime, Float,
    ForeignKey, Text, Enum as SQLEnum
)
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column, relationship
from typing import Optional, List
import enum


class Base(DeclarativeBase):
    """Base class for all models."""
    pass


class RunStatus(enum.Enum):
    """Outcome of a CLI run, mirroring its exit code."""
    RUNNING = "running"
    SUCCESS = "success"            # exit 0
    INVALID = "invalid"            # exit 1: validation, parameter or unsupported model
    NOT_CONVERGED = "not_converged"  # exit 2: convergence or estimation failure

    @classmethod
    def from_exit_code(cls, code: int) -> "RunStatus":
        return {0: cls.SUCCESS, 1: cls.INVALID, 2: cls.NOT_CONVERGED}.get(code, cls.INVALID)


class Run(Base):
    """One CLI subcommand invocation."""
    __tablename__ = "runs"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    command: Mapped[str] = mapped_column(String(32))
    arguments: Mapped[str] = mapped_column(Text, default="{}")
    seed: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    status: Mapped[RunStatus] = mapped_column(
        SQLEnum(RunStatus),
        default=RunStatus.RUNNING
    )
    exit_code: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    report: Mapped[Optional[str]] = mapped_column(Text, nullable=True)

    started_at: Mapped[datetime] = mapped_column(
        DateTime,
        default=datetime.utcnow
    )
    finished_at: Mapped[Optional[datetime]] = mapped_column(
        DateTime,
        nullable=True
    )

    bench_records: Mapped[List["BenchRecord"]] = relationship(
        "BenchRecord",
        back_populates="run",
        cascade="all, delete-orphan"
    )

    def __repr__(self):
        return f"<Run {self.id} {self.command} {self.status}>"


class BenchRecord(Base):
    """One (size, seed, method) cell of a bench run."""
    __tablename__ = "bench_records"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    run_id: Mapped[int] = mapped_column(
        Integer,
        ForeignKey("runs.id", ondelete="CASCADE"),
        nullable=False
    )
    size: Mapped[int] = mapped_column(Integer)
    seed: Mapped[int] = mapped_column(Integer)
    method: Mapped[str] = mapped_column(String(32))
    converged: Mapped[bool] = mapped_column(Boolean, default=False)
    iterations: Mapped[int] = mapped_column(Integer, default=0)
    final_residual: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    median_time: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    agrees: Mapped[bool] = mapped_column(Boolean, default=False)
    error: Mapped[str] = mapped_column(Text, default="")

    run: Mapped["Run"] = relationship("Run", back_populates="bench_records")

    def __repr__(self):
        return f"<BenchRecord {self.method} size={self.size} seed={self.seed}>"
