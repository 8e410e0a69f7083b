"""Decoding over the candidate index space and parsing of the resulting
index sequences back into span predictions.

Both decoders work against any object exposing
``start_session(sentence)`` returning a session with ``space`` and
``log_probs(prefix)``; tests drive them with stub models.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .data import IndexKind, POLARITIES, Span, SubtaskKind


@dataclass(frozen=True)
class Prediction:
    aspect: Span
    opinion: Optional[Span] = None
    polarity: Optional[str] = None

    def key(self):
        return (
            self.aspect.start,
            self.aspect.end,
            None if self.opinion is None else self.opinion.start,
            None if self.opinion is None else self.opinion.end,
            self.polarity,
        )


@dataclass
class ParseResult:
    predictions: List[Prediction]
    malformed_frames: int


def _slot_kinds(kind):
    if kind is SubtaskKind.AESC:
        return ("as", "ae", "pol")
    if kind is SubtaskKind.PAIR:
        return ("as", "ae", "os", "oe")
    return ("as", "ae", "os", "oe", "pol")


def _frame_to_prediction(frame, kind, space):
    slots = _slot_kinds(kind)
    values = {}
    for slot, y in zip(slots, frame):
        try:
            k = space.kind(y)
        except IndexError:
            return None
        if slot == "pol":
            if k is not IndexKind.POLARITY:
                return None
            values[slot] = POLARITIES[space.polarity_class(y)]
        else:
            if k is not IndexKind.POINTER:
                return None
            values[slot] = y
    if values["as"] > values["ae"]:
        return None
    if "os" in values and values["os"] > values["oe"]:
        return None
    return Prediction(
        aspect=Span(values["as"], values["ae"]),
        opinion=Span(values["os"], values["oe"]) if "os" in values else None,
        polarity=values.get("pol"),
    )


def parse_sequence(indices, kind, space):
    """Split an index sequence into fixed-size frames and keep the valid
    ones. Trailing </s> is stripped; malformed frames (wrong slot kind,
    inverted span, trailing partial frame) are dropped and counted;
    duplicates are reported once."""
    seq = list(indices)
    if seq and seq[-1] == space.eos:
        seq.pop()
    frame_len = kind.frame_length
    predictions = []
    seen = set()
    malformed = 0
    for i in range(0, len(seq), frame_len):
        frame = seq[i:i + frame_len]
        if len(frame) < frame_len:
            malformed += 1
            break
        pred = _frame_to_prediction(frame, kind, space)
        if pred is None:
            malformed += 1
            continue
        if pred.key() in seen:
            continue
        seen.add(pred.key())
        predictions.append(pred)
    return ParseResult(predictions=predictions, malformed_frames=malformed)


def constrained_mask(step_position_in_frame, kind, space, partial_frame):
    """Boolean mask (True = allowed) over the n+5 candidates for the given
    slot of a frame. Frame-start slots allow pointers plus </s>; span-end
    slots restrict pointers to >= the pending start; polarity slots allow
    only the three polarity indices. At least one candidate always stays
    allowed."""
    slots = _slot_kinds(kind)
    if not 0 <= step_position_in_frame < len(slots):
        raise ValueError(
            f"frame position {step_position_in_frame} out of range for {kind.value}"
        )
    slot = slots[step_position_in_frame]
    mask = np.zeros(space.total, dtype=bool)
    if slot == "pol":
        mask[space.n + 2: space.n + 5] = True
        return mask
    if slot in ("as", "os"):
        mask[1: space.n + 1] = True
        if slot == "as":
            mask[space.eos] = True
        return mask
    start_slot = {"ae": 0, "oe": 2}[slot]
    start = partial_frame[start_slot]
    if not 1 <= start <= space.n:
        start = 1
    mask[start: space.n + 1] = True
    return mask


def _masked(log_probs, generated, kind, space, constrained, steps_left=None):
    if not constrained:
        return log_probs
    frame_len = kind.frame_length
    pos = len(generated) % frame_len
    partial = generated[len(generated) - pos:]
    mask = constrained_mask(pos, kind, space, partial)
    if pos == 0 and steps_left is not None and steps_left < frame_len:
        # Not enough budget to finish another frame: close the sequence
        # instead of emitting a partial frame.
        mask = np.zeros_like(mask)
        mask[space.eos] = True
    return np.where(mask, log_probs, -np.inf)


def greedy_decode(model, sentence, kind, max_steps=40, constrained=False):
    """Argmax decoding (ties break toward the lowest index); stops at </s>
    or after max_steps. Returns generated indices including the final </s>
    when reached."""
    session = model.start_session(sentence)
    space = session.space
    max_steps = min(max_steps, getattr(session, "max_generate", max_steps))
    generated = []
    prefix = [space.bos]
    for step in range(max_steps):
        lp = _masked(session.log_probs(prefix), generated, kind, space, constrained,
                     steps_left=max_steps - step)
        y = int(np.argmax(lp))
        generated.append(y)
        prefix.append(y)
        if y == space.eos:
            break
    return generated


def beam_search(model, sentence, kind, beam_width=4, max_steps=40, constrained=False):
    """Length-synchronous beam search; hypotheses ending in </s> are
    finalized. Scores are plain sums of per-step log-probabilities (no
    length normalization). Returns the best finished hypothesis, falling
    back to the best unfinished one at max_steps."""
    if beam_width < 1:
        raise ValueError(f"beam width must be >= 1, got {beam_width}")
    session = model.start_session(sentence)
    space = session.space
    max_steps = min(max_steps, getattr(session, "max_generate", max_steps))
    live = [((), 0.0)]
    finished = []
    for step in range(max_steps):
        if not live:
            break
        expansions = []
        for seq, score in live:
            lp = _masked(
                session.log_probs([space.bos] + list(seq)), list(seq), kind, space,
                constrained, steps_left=max_steps - step,
            )
            for y in range(space.total):
                if np.isneginf(lp[y]):
                    continue
                expansions.append((seq + (y,), score + float(lp[y])))
        expansions.sort(key=lambda e: -e[1])
        live = []
        for seq, score in expansions[:beam_width]:
            if seq[-1] == space.eos:
                finished.append((seq, score))
            else:
                live.append((seq, score))
    pool = finished if finished else live
    best_seq, _ = max(pool, key=lambda e: e[1])
    return list(best_seq)


def sequence_score(model, sentence, indices):
    """Cumulative log-probability of a generated index sequence."""
    session = model.start_session(sentence)
    prefix = [session.space.bos]
    total = 0.0
    for y in indices:
        lp = session.log_probs(prefix)
        total += float(lp[y])
        prefix.append(y)
    return total
