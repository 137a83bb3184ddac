"""Relative-phase estimation from magnitudes alone.

Three magnitudes |x|, |y|, |x+y| pin the unsigned angle between two complex
numbers via the Law of Cosines; a fourth magnitude with y pre-rotated by a
small known angle orients it; adding a quarter-turn copy of the pair covers
the blind spots near 0 and pi.  All three estimators tolerate additive
perturbations of relative size eps on each participating magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import DEFAULT
from .signals import TWO_PI, circ_dist, wrap_angle


class PhaseEstimationError(ValueError):
    """Degenerate magnitudes or violated estimator preconditions."""


@dataclass
class PhaseEstimate:
    theta: float  # in [0, 2*pi); for unsigned mode, in [0, pi]
    error_bound: float
    mode: str  # unsigned | signed | full_circle
    out_of_range: bool = False


def law_of_cosines_angle(a: float, b: float, s: float) -> float:
    """Unsigned angle in [0, pi] between complex x, y from |x|=a, |y|=b, |x+y|=s.

    The arccos argument is clamped to [-1, 1]; measurement noise dominates
    any clamping error.
    """
    if a <= 0 or b <= 0:
        raise PhaseEstimationError("law of cosines needs both magnitudes positive")
    cos_supp = (a * a + b * b - s * s) / (2.0 * a * b)
    return float(np.pi - np.arccos(np.clip(cos_supp, -1.0, 1.0)))


def estimate_unsigned_phase(ax, ay, s, eps, c=None, c0=None) -> PhaseEstimate:
    """Estimate |theta| from perturbed |x|, |y|, |x+y|.

    Always within c0*sqrt(eps) of the truth; within c*eps when the true
    angle is at least c*eps away from both 0 and pi.
    """
    if eps > 1.0 / 9.0 + 1e-12:
        raise PhaseEstimationError("estimator requires eps <= 1/9")
    c = DEFAULT.c if c is None else c
    c0 = DEFAULT.c0 if c0 is None else c0
    theta = law_of_cosines_angle(ax, ay, s)
    # The tight bound needs the TRUE angle c*eps away from {0, pi}; from the
    # estimate alone that is certain only a further c0*sqrt(eps) inside.
    pad = c * eps + c0 * np.sqrt(eps)
    interior = pad < theta < np.pi - pad
    return PhaseEstimate(theta, c * eps if interior else c0 * np.sqrt(eps), "unsigned")


def estimate_signed_phase(ax, ay, s0, s1, eps, c=None, c0=None) -> PhaseEstimate:
    """Oriented angle from the extra magnitude s1 = |x + e^{2 c eps i} y + noise|.

    Hypotheses theta = +u and theta = -u predict different rotated angles;
    whichever matches s1's angle wins.  When neither matches within 3*c*eps,
    the estimate is flagged out_of_range (theta too close to 0 or pi).
    """
    c = DEFAULT.c if c is None else c
    c0 = DEFAULT.c0 if c0 is None else c0
    rot = 2.0 * c * eps
    u = estimate_unsigned_phase(ax, ay, s0, eps, c, c0).theta
    u_rot = law_of_cosines_angle(ax, ay, s1)
    pred_pos = circ_dist(u + rot, 0.0)  # theta = +u -> rotated angle |u + rot|
    pred_neg = circ_dist(u - rot, 0.0)  # theta = -u -> rotated angle |u - rot|
    res_pos = abs(u_rot - pred_pos)
    res_neg = abs(u_rot - pred_neg)
    positive = res_pos <= res_neg
    theta = u if positive else wrap_angle(-u)
    out = min(res_pos, res_neg) > 3.0 * c * eps
    return PhaseEstimate(float(theta), c * eps, "signed", out_of_range=out)


def _accept_window(est_theta: float, margin: float) -> bool:
    """True when an oriented estimate sits >= margin away from both 0 and pi."""
    return circ_dist(est_theta, 0.0) > margin and circ_dist(est_theta, np.pi) > margin


def estimate_full_phase(ax, ay, s, eps, c=None, c0=None) -> PhaseEstimate:
    """Oriented angle valid on the whole circle.

    ``s[j][l]`` holds |x + e^{i(2 c eps j + (pi/2) l)} y + noise| for
    j, l in {0, 1}.  The plain pair (l=0) is trusted away from {0, pi}, the
    quarter-turn pair (l=1) away from {pi/2, 3pi/2}; together the acceptance
    windows cover the circle whenever c*eps < pi/8.  Of the accepted
    branches, the one whose raw angle is farther from its blind spots wins.
    """
    c = DEFAULT.c if c is None else c
    c0 = DEFAULT.c0 if c0 is None else c0
    if c * eps > np.pi / 9.0 + 1e-12:
        raise PhaseEstimationError("full-circle estimation requires c*eps <= pi/9")
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (2, 2):
        raise PhaseEstimationError("expected a 2x2 magnitude table")
    margin = 3.0 * c * eps

    base = estimate_signed_phase(ax, ay, s[0, 0], s[1, 0], eps, c, c0)
    quar = estimate_signed_phase(ax, ay, s[0, 1], s[1, 1], eps, c, c0)
    quar_theta = wrap_angle(quar.theta - np.pi / 2.0)  # undo the pre-rotation of y

    cands = []
    if not base.out_of_range and _accept_window(base.theta, margin):
        cands.append((min(circ_dist(base.theta, 0.0), circ_dist(base.theta, np.pi)), base.theta))
    if not quar.out_of_range and _accept_window(quar.theta, margin):
        cands.append((min(circ_dist(quar.theta, 0.0), circ_dist(quar.theta, np.pi)), quar_theta))
    if not cands:
        # Noise can nudge both estimates just past their window edges even
        # though both raw estimates are fine (the windows overlap by design).
        # Fall back to the better-margined branch; only fully degenerate
        # margins indicate a genuine violation of the noise assumptions.
        fb = [
            (min(circ_dist(base.theta, 0.0), circ_dist(base.theta, np.pi)), base.theta),
            (min(circ_dist(quar.theta, 0.0), circ_dist(quar.theta, np.pi)), quar_theta),
        ]
        marg, theta = max(fb)
        if marg < 0.5 * c * eps:
            raise PhaseEstimationError(
                "both acceptance windows rejected: noise assumptions likely violated"
            )
        return PhaseEstimate(float(theta), c * eps, "full_circle")
    _, theta = max(cands)
    return PhaseEstimate(float(theta), c * eps, "full_circle")


def round_to_phase_set(theta: float, phase_set):
    """Nearest valid phase and its circular distance; ties go to the smaller phase."""
    return phase_set.round(theta)


def circular_median(angles) -> float:
    """Medoid under circular distance: the input angle minimising the summed
    circular distance to all others (ties to the smallest angle)."""
    a = wrap_angle(np.asarray(angles, dtype=np.float64))
    if a.size == 0:
        raise ValueError("empty sample")
    totals = circ_dist(a[:, None], a[None, :]).sum(axis=1)
    best = np.min(totals)
    return float(np.min(a[totals <= best + 1e-12]))
