"""
Training loop: paired batches from a background producer, forward in train
mode, combined loss, backprop, global-norm clipping and Adam.
"""

import logging
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from src.core.errors import ContractViolation, TrainingDivergedError
from src.core.tensor import Graph, backprop
from src.services.architectures.schemas.architectures import ArchitectureConfig
from src.services.architectures.service import ModelGraph, build_model
from src.services.architectures.weights import save_weights
from src.services.data.augment import augment_pair
from src.services.data.pairs import make_pairs
from src.services.data.schemas.data import AugmentConfig, FrameSequence, SamplePair
from src.services.data.sequence import load_corpus
from src.services.data.synthetic import generate_synthetic_sequence
from src.services.degradation.schemas.degradation import DegradationSettings
from src.services.losses.schemas.losses import LossWeights, SsimConfig
from src.services.losses.service import combined_loss_with_parts
from src.services.training.optimizer import AdamState, adam_step, clip_global_norm
from src.services.training.schemas.training import EpochStats, TrainConfig
from src.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

LOSS_LOG_HEADER = "epoch,mean_loss,mean_mse,mean_ssim"


@dataclass
class Batch:
    current: np.ndarray
    previous: np.ndarray
    target: np.ndarray
    seed: int


@dataclass
class TrainResult:
    model: ModelGraph
    history: List[EpochStats] = field(default_factory=list)


def training_sequences(cfg: TrainConfig) -> List[FrameSequence]:
    if cfg.data_dir is not None:
        return load_corpus(cfg.data_dir, size=(cfg.size, cfg.size))
    logger.info(f"No data directory given; generating {cfg.synthetic_sequences} synthetic sequences")
    return [
        generate_synthetic_sequence(derive_seed(cfg.seed, "synth", k), cfg.synthetic_frames, cfg.size, source=f"seq_{k:03d}")
        for k in range(cfg.synthetic_sequences)
    ]


def epoch_pairs(
    sequences: Sequence[FrameSequence],
    cfg: TrainConfig,
    epoch: int,
    settings: Optional[DegradationSettings] = None,
    augment: Optional[AugmentConfig] = None,
) -> List[SamplePair]:
    """Freshly degraded (and augmented) pairs for one epoch, in a seeded shuffled order."""
    epoch_seed = derive_seed(cfg.seed, "epoch", epoch)
    pairs: List[SamplePair] = []
    for seq in sequences:
        pairs.extend(make_pairs(seq, cfg.levels, cfg.clean_ratio, cfg.temporal_stride, epoch_seed, settings))
    if cfg.augment and augment is not None:
        pairs = [augment_pair(p, augment, derive_seed(p.seed, "augment")) for p in pairs]
    order = np.random.default_rng(derive_seed(epoch_seed, "shuffle")).permutation(len(pairs))
    return [pairs[i] for i in order]


def batches(pairs: Sequence[SamplePair], batch_size: int, seed: int) -> Iterator[Batch]:
    for b, start in enumerate(range(0, len(pairs), batch_size)):
        chunk = pairs[start : start + batch_size]
        yield Batch(
            current=np.stack([p.degraded for p in chunk]),
            previous=np.stack([p.previous if p.previous is not None else p.degraded for p in chunk]),
            target=np.stack([p.clean for p in chunk]),
            seed=derive_seed(seed, "batch", b),
        )


class _Producer(threading.Thread):
    """Builds each epoch's batches ahead of the optimizer through a bounded queue."""

    _DONE = object()

    def __init__(self, make_epoch, epochs: int, capacity: int):
        super().__init__(name="batch-producer", daemon=True)
        self._make_epoch = make_epoch
        self._epochs = epochs
        self.queue: "queue.Queue" = queue.Queue(maxsize=capacity)
        self._halt = threading.Event()

    def run(self) -> None:
        try:
            for epoch in range(1, self._epochs + 1):
                for batch in self._make_epoch(epoch):
                    if not self._put((epoch, batch)):
                        return
                if not self._put((epoch, None)):
                    return
        except Exception as e:
            self._put(e)
        self._put(self._DONE)

    def _put(self, item) -> bool:
        while not self._halt.is_set():
            try:
                self.queue.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def stop(self) -> None:
        self._halt.set()

    def items(self):
        while True:
            item = self.queue.get()
            if item is self._DONE:
                return
            if isinstance(item, Exception):
                raise item
            yield item


def train_step(
    model: ModelGraph,
    adam: AdamState,
    batch: Batch,
    weights: LossWeights,
    lr: float,
    ssim_cfg: SsimConfig = SsimConfig(),
    max_grad_norm: float = 5.0,
) -> Dict[str, float]:
    with Graph() as graph:
        out = model.forward(batch.current, batch.previous, mode="train")
        loss, parts = combined_loss_with_parts(out, batch.target, weights, ssim_cfg)
    value = loss.item()
    if not np.isfinite(value):
        raise TrainingDivergedError(batch.seed, value)
    grads = backprop(graph, output=loss)
    named = {name: grads[t] for name, t in model.params.items() if t in grads}
    named, norm = clip_global_norm(named, max_grad_norm)
    if not np.isfinite(norm):
        raise TrainingDivergedError(batch.seed, norm)
    adam_step(model.params, named, adam, lr)
    return {"loss": value, "mse": parts["mse"], "ssim": parts["ssim"], "grad_norm": norm}


def write_loss_log(path: Path, history: Sequence[EpochStats]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [LOSS_LOG_HEADER] + [f"{s.epoch},{s.mean_loss!r},{s.mean_mse!r},{s.mean_ssim!r}" for s in history]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def checkpoint_path(directory: Path, epoch: int) -> Path:
    return Path(directory) / f"epoch_{epoch:04d}.dgw"


def train(
    cfg: TrainConfig,
    sequences: Optional[Sequence[FrameSequence]] = None,
    settings: Optional[DegradationSettings] = None,
    augment: Optional[AugmentConfig] = None,
) -> TrainResult:
    sequences = list(sequences) if sequences is not None else training_sequences(cfg)
    if not sequences or not any(len(s) for s in sequences):
        raise ContractViolation("training dataset is empty")
    arch = ArchitectureConfig(kind=cfg.arch, base_channels=cfg.base_channels, input_size=sequences[0].shape[1:])
    model = build_model(arch, derive_seed(cfg.seed, "init"))
    model.loss_mode = cfg.loss_mode
    adam = AdamState.create(model.params)
    weights = cfg.weights
    augment = augment if augment is not None else AugmentConfig()
    logger.info(
        f"Training {model!r} for {cfg.epochs} epoch(s), loss {cfg.loss_mode} "
        f"(mse {weights.mse}, ssim {weights.ssim}), lr {cfg.lr}, batch {cfg.batch_size}"
    )

    def make_epoch(epoch: int) -> Iterator[Batch]:
        pairs = epoch_pairs(sequences, cfg, epoch, settings, augment)
        if not pairs:
            raise ContractViolation("training dataset produced no pairs")
        return batches(pairs, cfg.batch_size, derive_seed(cfg.seed, "epoch", epoch))

    result = TrainResult(model=model)
    producer = _Producer(make_epoch, cfg.epochs, cfg.prefetch)
    producer.start()
    sums = {"loss": 0.0, "mse": 0.0, "ssim": 0.0}
    count = 0
    try:
        for epoch, batch in producer.items():
            if batch is not None:
                parts = train_step(model, adam, batch, weights, cfg.lr, max_grad_norm=cfg.max_grad_norm)
                n = batch.current.shape[0]
                for key in sums:
                    sums[key] += parts[key] * n
                count += n
                continue
            stats = EpochStats(epoch, sums["loss"] / count, sums["mse"] / count, sums["ssim"] / count)
            result.history.append(stats)
            sums = dict.fromkeys(sums, 0.0)
            count = 0
            logger.info(
                f"epoch {epoch}/{cfg.epochs}: loss {stats.mean_loss:.6f} mse {stats.mean_mse:.6f} ssim {stats.mean_ssim:.4f}"
            )
            if cfg.loss_log is not None:
                write_loss_log(cfg.loss_log, result.history)
            if cfg.checkpoint_every and cfg.checkpoint_dir is not None and epoch % cfg.checkpoint_every == 0:
                save_weights(model, checkpoint_path(cfg.checkpoint_dir, epoch), cfg.loss_mode)
    finally:
        producer.stop()

    if cfg.out_path is not None:
        save_weights(model, cfg.out_path, cfg.loss_mode)
        logger.info(f"Saved final {model.kind} weights to {cfg.out_path}")
    return result
