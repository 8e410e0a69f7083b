"""Dual-channel (semantic + dependency-graph) encoder with a pointer
decoder for aspect-sentiment structured prediction, on a from-scratch
float64 autodiff core."""

from .backend import BACKEND_NAME
from .data import (
    CandidateIndexSpace,
    GoldTriplet,
    Sentence,
    Span,
    SubtaskKind,
    Vocabulary,
    build_adjacency,
    linearize_targets,
    parse_dataset,
)
from .encoder import AblationConfig
from .evaluation import attention_extract, attention_gap, span_f1
from .gradcheck import finite_diff_check
from .inference import beam_search, greedy_decode, parse_sequence
from .model import ModelConfig, SynGenModel
from .training import TrainConfig, evaluate_dataset, train

__version__ = "0.1.0"

__all__ = [
    "AblationConfig",
    "BACKEND_NAME",
    "CandidateIndexSpace",
    "GoldTriplet",
    "ModelConfig",
    "Sentence",
    "Span",
    "SubtaskKind",
    "SynGenModel",
    "TrainConfig",
    "Vocabulary",
    "attention_extract",
    "attention_gap",
    "beam_search",
    "build_adjacency",
    "evaluate_dataset",
    "finite_diff_check",
    "greedy_decode",
    "linearize_targets",
    "parse_dataset",
    "parse_sequence",
    "span_f1",
    "train",
]
