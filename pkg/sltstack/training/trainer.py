"""
Trainer
ADAM training loops for sequence models and the joint multi-task model
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import NonFiniteError
from ..numcore.optim import AdamState, ScheduleConfig, adam_update, clip_grad_norm, noam_lrate
from ..numcore.params import Checkpoint, save_checkpoint
from ..numcore.tensor import Tensor, no_grad
from ..transformer.loss import label_smoothed_loss
from ..transformer.model import SeqModel
from .augment import embedding_average_augment
from .batching import Batch, EncodedExample, batch_corpus
from .config import TrainConfig
from .joint import JointModel

logger = logging.getLogger(__name__)

CurvePoint = Tuple[int, float, float]


@dataclass
class StepReport:
    loss: float
    lrate: float
    parts: Dict[str, float] = field(default_factory=dict)


@dataclass
class TrainResult:
    """Per-epoch checkpoints plus the ``step,loss,lrate`` curve"""

    checkpoints: List[Checkpoint] = field(default_factory=list)
    loss_curve: List[CurvePoint] = field(default_factory=list)
    epoch_losses: List[float] = field(default_factory=list)
    epoch_parts: List[Dict[str, float]] = field(default_factory=list)
    dev_losses: List[float] = field(default_factory=list)
    aborted: List[Tuple[int, int]] = field(default_factory=list)
    stopped_early: bool = False


class Trainer:
    """
    One optimizer, one schedule, one model

    Subclasses supply the batch loss and the trainable parameters.
    """

    def __init__(self, model, cfg: TrainConfig, checkpoint_dir: Optional[Union[str, Path]] = None):
        self.model = model
        self.cfg = cfg
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.state = AdamState()
        self.schedule = ScheduleConfig(k=cfg.k, d_model=model.config.d_model, warmup=cfg.warmup)
        self.rng = np.random.default_rng(cfg.seed)

    # *** hooks ***
    def parameters(self) -> Mapping[str, Tensor]:
        raise NotImplementedError

    def all_parameters(self) -> Mapping[str, Tensor]:
        return self.parameters()

    def batch_loss(self, batch: Batch, augment: bool = True) -> Tuple[Tensor, Dict[str, float]]:
        raise NotImplementedError

    def snapshot(self) -> Checkpoint:
        raise NotImplementedError

    # *** augmentation ***
    def _augment_hook(self):
        if self.cfg.emb_avg_rate <= 0:
            return None

        def hook(embedded: Tensor, table: Tensor, site: str) -> Tensor:
            if not self.cfg.augments(site):
                return embedded
            return embedding_average_augment(embedded, table, self.cfg.emb_avg_rate, self.rng)

        return hook

    # *** steps ***
    @property
    def global_step(self) -> int:
        return self.state.step

    def train_step(self, batch: Batch) -> StepReport:
        """
        One teacher-forced ADAM step at noam_lrate(global_step + 1)

        Raises:
            NonFiniteError: the loss or a gradient is not finite; parameters are left untouched
        """
        for tensor in self.all_parameters().values():
            tensor.grad = None
        self.model.train(self.rng, self.cfg.dropout)
        try:
            loss, parts = self.batch_loss(batch)
        finally:
            self.model.eval()
        value = loss.item()
        lrate = noam_lrate(self.state.step + 1, self.schedule)
        if not math.isfinite(value):
            raise NonFiniteError(f"loss is {value}")
        params = self.parameters()
        loss.backward(leaves=params.values())
        grads = {n: t.grad for n, t in params.items()}
        if self.cfg.max_grad_norm > 0:
            clip_grad_norm(grads, self.cfg.max_grad_norm)
        if not adam_update(params, grads, self.state, lrate):
            raise NonFiniteError("gradient is not finite")
        return StepReport(value, lrate, parts)

    def evaluate_loss(self, batches: Sequence[Batch]) -> float:
        """Mean batch loss without dropout or augmentation"""
        self.model.eval()
        losses = []
        with no_grad():
            for batch in batches:
                loss, _ = self.batch_loss(batch, augment=False)
                losses.append(loss.item())
        return float(np.mean(losses)) if losses else math.nan

    # *** loop ***
    def train(self, examples: Sequence[EncodedExample], dev: Optional[Sequence[EncodedExample]] = None) -> TrainResult:
        """
        Run ``cfg.epochs`` epochs over length-sorted batches in shuffled order

        Args:
            examples: Training examples
            dev: Optional held-out examples for the per-epoch dev loss and early stopping

        Returns:
            TrainResult
        """
        result = TrainResult()
        if self.cfg.epochs == 0 or not examples:
            return result
        batches = batch_corpus(examples, self.cfg.batch_target_units)
        dev_batches = batch_corpus(dev, self.cfg.batch_target_units) if dev else []
        best_dev, stale = math.inf, 0
        logger.info("Training for %d epochs on %d examples in %d batches", self.cfg.epochs, len(examples), len(batches))

        for epoch in range(1, self.cfg.epochs + 1):
            losses: List[float] = []
            parts_sum: Dict[str, float] = {}
            for batch_id in self.rng.permutation(len(batches)):
                try:
                    report = self.train_step(batches[batch_id])
                except NonFiniteError as e:
                    logger.warning("Epoch %d batch %d: %s; aborting the epoch", epoch, batch_id, e)
                    result.aborted.append((epoch, int(batch_id)))
                    break
                losses.append(report.loss)
                result.loss_curve.append((self.global_step, report.loss, report.lrate))
                for key, value in report.parts.items():
                    parts_sum[key] = parts_sum.get(key, 0.0) + value

            epoch_loss = float(np.mean(losses)) if losses else math.nan
            result.epoch_losses.append(epoch_loss)
            result.epoch_parts.append({k: v / max(len(losses), 1) for k, v in parts_sum.items()})
            checkpoint = self.snapshot()
            result.checkpoints.append(checkpoint)
            if self.checkpoint_dir is not None:
                self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
                save_checkpoint(self.checkpoint_dir / f"epoch{epoch:03d}.sqbr", checkpoint)

            message = f"epoch {epoch}: loss {epoch_loss:.4f}, lrate {noam_lrate(max(self.global_step, 1), self.schedule):.3e}"
            if dev_batches:
                dev_loss = self.evaluate_loss(dev_batches)
                result.dev_losses.append(dev_loss)
                message += f", dev loss {dev_loss:.4f}"
                if dev_loss < best_dev:
                    best_dev, stale = dev_loss, 0
                else:
                    stale += 1
            logger.info(message)
            if self.cfg.patience is not None and dev_batches and stale >= self.cfg.patience:
                logger.info("Dev loss has not improved for %d epochs; stopping early", stale)
                result.stopped_early = True
                break
        return result


class Seq2SeqTrainer(Trainer):
    """Trains an ASR, MT or end-to-end SeqModel"""

    model: SeqModel

    def parameters(self) -> Mapping[str, Tensor]:
        return dict(self.model.params.items())

    def snapshot(self) -> Checkpoint:
        return self.model.params.snapshot()

    def batch_loss(self, batch: Batch, augment: bool = True) -> Tuple[Tensor, Dict[str, float]]:
        hook = self._augment_hook() if augment else None
        logits, _ = self.model.forward(batch.inputs, batch.input_lengths, batch.decoder_in, hook)
        return label_smoothed_loss(logits, batch.targets, self.cfg.label_smoothing), {}


class JointTrainer(Trainer):
    """
    Trains a JointModel on asr_loss + mt_loss_weight * mt_loss

    Only the parameters its freeze mode allows receive updates.
    """

    model: JointModel

    def parameters(self) -> Mapping[str, Tensor]:
        return self.model.trainable_parameters()

    def all_parameters(self) -> Mapping[str, Tensor]:
        return self.model.named_parameters()

    def snapshot(self) -> Checkpoint:
        return self.model.snapshot()

    def batch_loss(self, batch: Batch, augment: bool = True) -> Tuple[Tensor, Dict[str, float]]:
        hook = self._augment_hook() if augment else None
        total, asr_loss, mt_loss = self.model.losses(batch, self.cfg.label_smoothing, self.cfg.mt_loss_weight, hook)
        return total, {"asr_loss": asr_loss.item(), "mt_loss": mt_loss.item()}


def train(
    model: SeqModel,
    corpus: Sequence[EncodedExample],
    cfg: TrainConfig,
    dev: Optional[Sequence[EncodedExample]] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
) -> TrainResult:
    return Seq2SeqTrainer(model, cfg, checkpoint_dir).train(corpus, dev)


def train_joint(
    joint: JointModel,
    corpus: Sequence[EncodedExample],
    cfg: TrainConfig,
    dev: Optional[Sequence[EncodedExample]] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
) -> TrainResult:
    """Train a joint model on examples carrying both transcript and translation targets"""
    if joint.freeze_mode != cfg.freeze_mode:
        logger.info("Using the joint model's freeze mode %s (config says %s)", joint.freeze_mode, cfg.freeze_mode)
    return JointTrainer(joint, cfg, checkpoint_dir).train(corpus, dev)


def write_loss_curve(path: Union[str, Path], curve: Sequence[CurvePoint]) -> None:
    """``step,loss,lrate`` lines with a header"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write("step,loss,lrate\n")
        for step, loss, lrate in curve:
            f.write(f"{step},{loss!r},{lrate!r}\n")
