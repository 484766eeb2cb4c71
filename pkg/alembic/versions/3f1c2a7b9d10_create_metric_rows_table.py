"""create metric_rows table

Revision ID: 3f1c2a7b9d10
Revises: 
Create Date: 2026-10-19 10:12:03.118402

"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa

# revision identifiers, used by Alembic.
revision: str = '3f1c2a7b9d10'
down_revision: Union[str, None] = None
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    op.create_table('metric_rows',
    sa.Column('id', sa.Integer(), autoincrement=True, nullable=False),
    sa.Column('run_id', sa.String(length=64), nullable=False),
    sa.Column('method', sa.String(length=128), nullable=False),
    sa.Column('noise_level', sa.Integer(), nullable=True),
    sa.Column('n', sa.Integer(), nullable=False),
    sa.Column('mse', sa.Float(), nullable=True),
    sa.Column('psnr', sa.Float(), nullable=True),
    sa.Column('ssim', sa.Float(), nullable=True),
    sa.Column('pixel_acc', sa.Float(), nullable=True),
    sa.Column('mean_iou', sa.Float(), nullable=True),
    sa.Column('stored_at', sa.DateTime(timezone=True), nullable=False),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_metric_rows_run_id'), 'metric_rows', ['run_id'], unique=False)
    op.create_index(op.f('ix_metric_rows_stored_at'), 'metric_rows', ['stored_at'], unique=False)


def downgrade() -> None:
    op.drop_index(op.f('ix_metric_rows_stored_at'), table_name='metric_rows')
    op.drop_index(op.f('ix_metric_rows_run_id'), table_name='metric_rows')
    op.drop_table('metric_rows')
