"""Choosing which anchor to range to next.

The greedy policy scores every anchor by the change in covariance trace that
a range to it would cause, and takes the largest reduction. Because the range
Jacobian only touches position, the score needs nothing but the three
position-row blocks of the covariance::

    tr(dP) = -(|Pxx e|^2 + |Pxv e|^2 + |Pxd e|^2) / (e' Pxx e + r)

with ``e`` the unit vector from the anchor to the position estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ekf import EPS_DIST, ID, IV, IX, DegenerateGeometryError, FilterError
from .sim import Anchor

# relative score difference treated as a tie (broken by lowest id)
TIE_RTOL = 1e-13


class NoValidAnchorError(RuntimeError):
    """Every candidate anchor was excluded; no measurement this tick."""


@dataclass(frozen=True)
class AnchorScore:
    anchor_id: int
    trace_delta: float
    predicted_range: float


@dataclass(frozen=True)
class SelectionPolicy:
    """Either ``greedy`` or ``sequential`` with a fixed polling order."""

    kind: str = "greedy"
    order: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("greedy", "sequential"):
            raise ValueError(f"unknown policy {self.kind!r}")
        if self.kind == "sequential" and not self.order:
            raise ValueError("sequential policy needs an anchor order")
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))

    @classmethod
    def greedy(cls) -> "SelectionPolicy":
        return cls("greedy")

    @classmethod
    def sequential(cls, order: Sequence[int]) -> "SelectionPolicy":
        return cls("sequential", tuple(order))

    def check(self, anchors: Sequence[Anchor]) -> None:
        if self.kind == "sequential" and sorted(self.order) != sorted(a.id for a in anchors):
            raise ValueError(f"sequential order {self.order} is not a permutation of the anchor ids")


def score_anchor(
    cov: np.ndarray,
    x_hat: np.ndarray,
    anchor: Anchor,
    r: float,
    weights: np.ndarray | None = None,
) -> AnchorScore:
    """Trace change of the covariance if a range to `anchor` were applied now.

    `weights` optionally weights the nine diagonal entries in the trace (one
    per state component); ``None`` is the plain trace.
    """
    d = np.asarray(x_hat, dtype=float) - anchor.p
    rho = float(np.linalg.norm(d))
    if rho <= EPS_DIST:
        raise DegenerateGeometryError(f"position estimate coincides with anchor {anchor.id}")
    e = d / rho
    a = cov[IX, IX] @ e
    b = cov[IV, IX] @ e
    c = cov[ID, IX] @ e
    den = float(e @ a) + r
    if not den > 0.0:
        raise FilterError(f"zero innovation variance for anchor {anchor.id}")
    if weights is None:
        num = a @ a + b @ b + c @ c
    else:
        w = np.asarray(weights, dtype=float)
        num = w[IX] @ a**2 + w[IV] @ b**2 + w[ID] @ c**2
    return AnchorScore(anchor.id, -float(num) / den, rho)


def score_anchors(cov, x_hat, anchors: Sequence[Anchor], r: float, weights=None) -> list[AnchorScore]:
    """Scores for every anchor whose geometry allows an update; others are skipped."""
    scores = []
    for anchor in anchors:
        try:
            scores.append(score_anchor(cov, x_hat, anchor, r, weights))
        except FilterError:
            continue
    return scores


def select_anchor(
    cov: np.ndarray,
    x_hat: np.ndarray,
    anchors: Sequence[Anchor],
    r: float,
    policy: SelectionPolicy,
    step: int,
    weights=None,
) -> int:
    """Id of the anchor to range to at ranging tick `step`."""
    if not anchors:
        raise NoValidAnchorError("no anchors")
    if policy.kind == "sequential":
        return policy.order[step % len(policy.order)]
    scores = score_anchors(cov, x_hat, anchors, r, weights)
    if not scores:
        raise NoValidAnchorError("every anchor was excluded by its geometry")
    best = min(s.trace_delta for s in scores)
    tol = TIE_RTOL * abs(best)
    return min(s.anchor_id for s in scores if s.trace_delta <= best + tol)
