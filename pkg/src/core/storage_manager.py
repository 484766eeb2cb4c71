import logging
import math
from datetime import datetime, timezone
from typing import List, Optional, Sequence

from sqlalchemy import select
from sqlalchemy.exc import SQLAlchemyError

from src.models.metric_record import Base, MetricRecord
from src.services.evaluation.schemas.evaluation import MetricRow
from src.utils.database import get_engine, session_factory

logger = logging.getLogger(__name__)

METRICS = ("mse", "psnr", "ssim", "pixel_acc", "mean_iou")


def _to_db(value: float) -> Optional[float]:
    return None if math.isnan(value) else float(value)


def _from_db(value: Optional[float]) -> float:
    return float("nan") if value is None else float(value)


class ReportStorageManager:
    """DB-backed store of evaluation rows using SQLAlchemy"""

    def __init__(self, url: str, create_tables: bool = True):
        self.url = url
        self.SessionLocal = session_factory(url)
        # Alembic owns the schema of shared databases; fresh local files get create_all
        if create_tables:
            Base.metadata.create_all(get_engine(url))

    def write_rows(self, run_id: str, rows: Sequence[MetricRow]) -> int:
        """Append rows under run_id, preserving their order"""
        try:
            with self.SessionLocal() as session:
                now = datetime.now(timezone.utc)
                for row in rows:
                    session.add(
                        MetricRecord(
                            run_id=run_id,
                            method=row.method,
                            noise_level=row.noise_level,
                            n=row.n,
                            stored_at=now,
                            **{m: _to_db(getattr(row, m)) for m in METRICS},
                        )
                    )
                session.commit()
                logger.info(f"Stored {len(rows)} metric row(s) for run: {run_id}")
                return len(rows)
        except SQLAlchemyError as e:
            logger.error(f"DB error writing metric rows: {e}")
            raise

    def read_rows(self, run_id: str) -> List[MetricRow]:
        """Rows of one run in insertion order; empty on error"""
        try:
            with self.SessionLocal() as session:
                records = session.execute(
                    select(MetricRecord).where(MetricRecord.run_id == run_id).order_by(MetricRecord.id)
                ).scalars().all()
                if not records:
                    logger.debug(f"No metric rows found for run: {run_id}")
                return [
                    MetricRow(
                        method=r.method,
                        noise_level=r.noise_level,
                        n=r.n,
                        **{m: _from_db(getattr(r, m)) for m in METRICS},
                    )
                    for r in records
                ]
        except SQLAlchemyError as e:
            logger.error(f"DB error reading metric rows: {e}")
            return []
