"""Teacher-forced NLL training with two learning-rate groups."""

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import autograd as ag
from .data import CandidateIndexSpace, SubtaskKind, linearize_targets
from .errors import DivergedTrainingError, SynGenError
from .evaluation import span_f1
from .inference import beam_search, greedy_decode, parse_sequence
from .model import ModelConfig, SynGenModel
from .optim import Adam, clip_grad_global_norm


@dataclass
class TrainConfig:
    subtask: SubtaskKind = SubtaskKind.TRIPLET
    epochs: int = 200
    batch_size: int = 8
    lr_gat: float = 1e-5
    lr_other: float = 1e-4
    gat_lr_x10: bool = False  # desk-scale escape hatch; off by default
    seed: int = 0
    clip_norm: Optional[float] = 5.0
    eval_every: int = 20  # dev-F1 cadence when a dev set is given
    beam_width: int = 4
    max_decode_steps: int = 40
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        # Zero is allowed so a freeze-everything run stays expressible.
        if self.lr_gat < 0 or self.lr_other < 0:
            raise SynGenError("learning rates must not be negative")
        if self.batch_size < 1:
            raise SynGenError("batch size must be >= 1")
        if self.epochs < 1:
            raise SynGenError("epochs must be >= 1")

    @property
    def effective_lr_gat(self):
        return self.lr_gat * (10.0 if self.gat_lr_x10 else 1.0)


@dataclass
class TrainStats:
    epoch_losses: List[float] = field(default_factory=list)
    epoch_f1: List[Optional[float]] = field(default_factory=list)
    wall_clock_seconds: float = 0.0

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss,f1\n")
            for i, loss in enumerate(self.epoch_losses):
                f1 = self.epoch_f1[i]
                fh.write(f"{i + 1},{loss!r},{'' if f1 is None else repr(f1)}\n")


def batch_mean(losses):
    total = losses[0]
    for loss in losses[1:]:
        total = total + loss
    return ag.scale(total, 1.0 / len(losses))


def decode_sentence(model, sentence, kind, beam_width=4, max_steps=40, constrained=False):
    if beam_width <= 1:
        return greedy_decode(model, sentence, kind, max_steps=max_steps, constrained=constrained)
    return beam_search(
        model, sentence, kind, beam_width=beam_width, max_steps=max_steps,
        constrained=constrained,
    )


def evaluate_dataset(model, dataset, kind, beam_width=4, max_steps=40, constrained=False):
    """Decode every sentence, parse, and score against gold."""
    pred_sets = []
    gold_sets = []
    details = []
    for sentence in dataset:
        space = CandidateIndexSpace(sentence.n)
        seq = decode_sentence(
            model, sentence, kind, beam_width=beam_width, max_steps=max_steps,
            constrained=constrained,
        )
        result = parse_sequence(seq, kind, space)
        pred_sets.append(result.predictions)
        gold_sets.append(sentence.gold)
        details.append((sentence, seq, result))
    return span_f1(pred_sets, gold_sets, kind), details


def train(dataset, cfg, dev=None, on_epoch=None):
    """Train a fresh model; deterministic given cfg.seed.

    Returns (model, stats). With a dev set, parameters roll back to the
    best dev-F1 epoch at the end; otherwise the final epoch wins.
    `on_epoch(epoch, model, stats)` runs after every epoch when given.
    """
    if not dataset:
        raise SynGenError("training dataset is empty")
    spaces = [CandidateIndexSpace(s.n) for s in dataset]
    targets = [
        linearize_targets(s, cfg.subtask, spaces[i]) for i, s in enumerate(dataset)
    ]
    from .data import Vocabulary

    vocab = Vocabulary.build(dataset)
    model = SynGenModel(vocab, cfg.model, seed=cfg.seed)
    groups = model.param_groups(cfg.effective_lr_gat, cfg.lr_other)
    optimizer = Adam(groups)
    shuffle_rng = np.random.default_rng(cfg.seed + 1)
    all_params = list(model.params.values())

    stats = TrainStats()
    best = None  # (f1, param snapshot)
    start = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(dataset))
        loss_sum = 0.0
        for step, lo in enumerate(range(0, len(order), cfg.batch_size)):
            batch = order[lo:lo + cfg.batch_size]
            losses = [
                model.teacher_forced_loss(dataset[i], targets[i]) for i in batch
            ]
            batch_loss = batch_mean(losses)
            if not np.isfinite(batch_loss.data):
                raise DivergedTrainingError(epoch, step)
            ag.backward(batch_loss)
            if cfg.clip_norm is not None:
                clip_grad_global_norm(all_params, cfg.clip_norm)
            optimizer.step()
            loss_sum += sum(float(l.data) for l in losses)
        stats.epoch_losses.append(loss_sum / len(dataset))

        f1 = None
        if dev is not None and cfg.eval_every and (
            epoch % cfg.eval_every == 0 or epoch == cfg.epochs
        ):
            report, _ = evaluate_dataset(
                model, dev, cfg.subtask, beam_width=cfg.beam_width,
                max_steps=cfg.max_decode_steps,
            )
            f1 = report.f1
            if best is None or f1 > best[0]:
                best = (f1, model.copy_param_data())
        stats.epoch_f1.append(f1)
        if on_epoch is not None:
            on_epoch(epoch, model, stats)
    if best is not None:
        model.set_param_data(best[1])
    stats.wall_clock_seconds = time.perf_counter() - start
    return model, stats
