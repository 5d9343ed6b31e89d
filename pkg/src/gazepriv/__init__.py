"""Streaming privacy filters for gaze data, with utility and re-identification metrics."""
from .classification import MovementLabel, classify, idt_classify, ikf_classify
from .interaction import angular_offset, rank1_fixation, simulate_interactions, summarize_accuracy
from .privacy import evaluate_privacy, make_velocity_windows, rank1_ir, similarity_matrix
from .privatizers import (FIR, LWMA, Downsample, GaussianNoise, Identity, Kalman, Median3,
                          PrivatizerMeta, TargetedNoise, apply_privatizer, make_privatizer)
from .signal import GazeSample, Recording, ScreenBounds, TargetEvent, preprocess

__version__ = "0.1.0"
