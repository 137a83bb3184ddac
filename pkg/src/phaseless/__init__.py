"""Sparse recovery from magnitude-only linear measurements.

Implements exact recovery of sparse complex signals and linf/l2, l2/l2 and
l1/l1 approximate recovery, all from |Phi x| with implicit seeded sensing
ensembles and sublinear-time combinatorial decoding.
"""

from .constants import DEFAULT, Constants, load_constants, save_constants, strict_paper
from .signals import (
    ComplexSignal,
    ConfigError,
    PhaseSet,
    SignalSpec,
    SparseApprox,
    generate,
    head_indices,
    is_eta_distinct,
    phase_error,
    tail_norm,
)

__version__ = "0.1.0"


class DecodeFailure(RuntimeError):
    """A decoder could not produce an output meeting its contract."""


class BucketUnsatError(DecodeFailure):
    """No consistent phase assignment for a bucket (overflow or bad data)."""


class StitchFailure(DecodeFailure):
    """Cross-bucket phase stitching failed (graph disconnected)."""


class AlignmentFailure(DecodeFailure):
    """No rotation of the valid phase set was accepted."""
