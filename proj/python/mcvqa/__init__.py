"""Multiple-choice VQA models, training and ensemble analysis."""

from ._mcvqa import (
    Error,
    adam_step,
    analyze,
    classify_difficulty,
    evaluate,
    gradcheck,
    kinds,
    majority_vote,
    synthesize,
    train,
)

__all__ = [
    "Error",
    "adam_step",
    "analyze",
    "classify_difficulty",
    "evaluate",
    "gradcheck",
    "kinds",
    "majority_vote",
    "synthesize",
    "train",
]
