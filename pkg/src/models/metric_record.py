from datetime import datetime
from typing import Optional

from sqlalchemy import DateTime, Float, Integer, String
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column


# SQLAlchemy base
class Base(DeclarativeBase):
    pass


# One evaluation MetricRow, grouped by run id; noise_level NULL is the average row
class MetricRecord(Base):
    __tablename__ = "metric_rows"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    run_id: Mapped[str] = mapped_column(String(64), nullable=False, index=True)
    method: Mapped[str] = mapped_column(String(128), nullable=False)
    noise_level: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    n: Mapped[int] = mapped_column(Integer, nullable=False)
    # SQLite stores NaN as NULL, so every metric column is nullable
    mse: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    psnr: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    ssim: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    pixel_acc: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    mean_iou: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    stored_at: Mapped[datetime] = mapped_column(DateTime(timezone=True), nullable=False, index=True)
