"""SQLite run ledger built with SQLModel."""
from __future__ import annotations

import datetime as dt
from pathlib import Path
from typing import Any, Dict, List, Optional

from sqlalchemy import Column, DateTime, JSON
from sqlmodel import Field, Session, SQLModel, create_engine, select

from config import settings


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc)


class RunRecord(SQLModel, table=True):
    id: Optional[int] = Field(default=None, primary_key=True)
    command: str = Field(index=True)
    params: Optional[dict] = Field(default=None, sa_column=Column(JSON, nullable=True))
    result: Optional[dict] = Field(default=None, sa_column=Column(JSON, nullable=True))
    seed: Optional[int] = Field(default=None, sa_column_kwargs={"nullable": True})
    created_at: dt.datetime = Field(default_factory=_utcnow, sa_column=Column(DateTime(timezone=True)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "command": self.command,
            "params": self.params,
            "result": self.result,
            "seed": self.seed,
            "created_at": self.created_at.isoformat() if self.created_at else None,
        }


_engine = None


def get_engine(path: Optional[Path] = None):
    """Engine for the run ledger, created on first use."""

    global _engine
    if _engine is None:
        settings.ensure_directories()
        db_path = path or settings.db_path
        _engine = create_engine(
            f"sqlite:///{db_path}",
            echo=False,
            connect_args={"check_same_thread": False},
        )
    return _engine


def init_db(path: Optional[Path] = None) -> None:
    """Create the ledger table if it does not exist yet."""

    settings.ensure_directories()
    engine = get_engine(path)
    SQLModel.metadata.create_all(engine)


def get_session() -> Session:
    return Session(get_engine())


def record_run(
    command: str,
    params: Dict[str, Any],
    result: Dict[str, Any],
    seed: Optional[int] = None,
) -> RunRecord:
    init_db()
    with get_session() as session:
        record = RunRecord(command=command, params=params, result=result, seed=seed)
        session.add(record)
        session.commit()
        session.refresh(record)
        return record


def list_runs(command: Optional[str] = None, limit: int = 20) -> List[RunRecord]:
    init_db()
    with get_session() as session:
        statement = select(RunRecord)
        if command:
            statement = statement.where(RunRecord.command == command)
        statement = statement.order_by(RunRecord.id.desc()).limit(limit)
        return list(session.exec(statement))


__all__ = [
    "RunRecord",
    "get_engine",
    "get_session",
    "init_db",
    "list_runs",
    "record_run",
]
