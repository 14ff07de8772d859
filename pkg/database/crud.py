"""CRUD operations for database models."""
import json
import math
from datetime import datetime
from typing import Optional, List
from sqlalchemy import select, desc, func
from sqlalchemy.orm import Session
from .models import Run, BenchRecord, RunStatus


def _optional_float(value) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


class RunCRUD:
    """CRUD operations for Run model."""

    @staticmethod
    def start(
        session: Session,
        command: str,
        arguments: dict,
        seed: Optional[int] = None
    ) -> Run:
        """Record a run that has just started."""
        run = Run(
            command=command,
            arguments=json.dumps(arguments, sort_keys=True, default=str),
            seed=seed
        )
        session.add(run)
        session.commit()
        session.refresh(run)
        return run

    @staticmethod
    def finish(
        session: Session,
        run_id: int,
        exit_code: int,
        report: Optional[dict] = None
    ) -> Optional[Run]:
        """Store the exit code and report of a finished run."""
        run = RunCRUD.get(session, run_id)
        if not run:
            return None

        run.exit_code = exit_code
        run.status = RunStatus.from_exit_code(exit_code)
        run.report = json.dumps(report, sort_keys=True, default=str) if report is not None else None
        run.finished_at = datetime.utcnow()
        session.commit()
        return run

    @staticmethod
    def get(session: Session, run_id: int) -> Optional[Run]:
        """Get run by ID."""
        result = session.execute(
            select(Run).where(Run.id == run_id)
        )
        return result.scalar_one_or_none()

    @staticmethod
    def get_recent(
        session: Session,
        command: Optional[str] = None,
        limit: int = 10
    ) -> List[Run]:
        """Get the most recent runs, optionally for one command."""
        query = select(Run).order_by(desc(Run.id)).limit(limit)
        if command is not None:
            query = query.where(Run.command == command)
        return session.execute(query).scalars().all()

    @staticmethod
    def count_by_status(session: Session, status: RunStatus) -> int:
        """Count runs with a given status."""
        result = session.execute(
            select(func.count(Run.id)).where(Run.status == status)
        )
        return result.scalar()


class BenchRecordCRUD:
    """CRUD operations for BenchRecord model."""

    @staticmethod
    def add_many(session: Session, run_id: int, rows: List[dict]) -> int:
        """Store bench cells for a run."""
        for row in rows:
            session.add(BenchRecord(
                run_id=run_id,
                size=int(row["size"]),
                seed=int(row["seed"]),
                method=str(row["method"]),
                converged=bool(row["converged"]),
                iterations=int(row.get("iterations") or 0),
                final_residual=_optional_float(row.get("final_residual")),
                median_time=_optional_float(row.get("median_time")),
                agrees=bool(row["agrees"]),
                error=str(row.get("error") or "")
            ))
        session.commit()
        return len(rows)

    @staticmethod
    def for_run(session: Session, run_id: int) -> List[BenchRecord]:
        """Get the bench cells of a run."""
        result = session.execute(
            select(BenchRecord)
            .where(BenchRecord.run_id == run_id)
            .order_by(BenchRecord.size, BenchRecord.seed, BenchRecord.method)
        )
        return result.scalars().all()
