"""Hyperbolicity certificates for orbit segments and pseudo-orbits.

For each segment the derivative blocks (A, B, C, D) along the orbit are
checked against four families of inequalities at rates (lambda, epsilon):

  contraction products   prod_{j<k} ||D_j||  <= lambda^k          k = 1..n
  expansion products     prod_{j>=k} m(A_j)  >= lambda^(k-n)      k = 0..n-1
  stepwise ratio         ||D_j|| / m(A_j)    <= lambda^2
  off-diagonal size      ||B_j||, ||C_j||    <= epsilon

plus, for pseudo-orbits, the jump residual of every segment <= delta.
Product conditions are evaluated as sums of logs so long segments never
overflow; every inequality's slack is reported so the binding constraint
is identifiable.  All checks are floating point with a small absolute
comparison tolerance; nothing here is interval-rigorous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pseudo_orbit import OrbitSegment, SegmentedPseudoOrbit, SplittingAssignment
from .splitting import block_decompose, min_norm, op_norm
from .systems import SmoothMap

__all__ = [
    "MarginRow",
    "Certificate",
    "pseudo_orbit_blocks",
    "segment_blocks",
    "certify_segment",
    "certify_pseudo_orbit",
    "certify_blocks",
    "is_quasi_hyperbolic",
    "min_feasible_lambda",
]

#: absolute slack below which a violated inequality is attributed to rounding
PASS_TOL = 1e-12


@dataclass(frozen=True)
class MarginRow:
    """One inequality: its two sides and the (oriented) slack.

    Product conditions carry log-domain lhs/rhs; the others are linear.
    ``step`` is the global flattened index (the product count k for the
    product conditions, the block index j otherwise, the join index for
    residual rows).
    """

    condition: str
    segment: int
    step: int
    lhs: float
    rhs: float
    margin: float


@dataclass(eq=False)
class Certificate:
    passed: bool
    lam: float
    epsilon: float
    delta: float | None
    margins: tuple
    blocks: tuple = field(repr=False, default=())
    tol: float = PASS_TOL

    def worst(self, condition: str | None = None) -> MarginRow:
        rows = self.margins if condition is None else [
            r for r in self.margins if r.condition == condition
        ]
        if not rows:
            raise ValueError("no margin rows recorded")
        return min(rows, key=lambda r: (r.margin if not math.isnan(r.margin) else -math.inf))

    def to_dict(self) -> dict:
        d = {
            "passed": bool(self.passed),
            "lambda": float(self.lam),
            "epsilon": float(self.epsilon),
            "margins": [
                {
                    "condition": r.condition,
                    "segment": r.segment,
                    "step": r.step,
                    "lhs": float(r.lhs),
                    "rhs": float(r.rhs),
                    "margin": float(r.margin),
                }
                for r in self.margins
            ],
        }
        if self.delta is not None:
            d["delta"] = float(self.delta)
        return d


def segment_blocks(
    segment: OrbitSegment, splittings: SplittingAssignment, f: SmoothMap
) -> tuple:
    """Derivative blocks along one segment.

    Block j is the derivative at the j-th point, read from the splitting
    at index j into the splitting at index j+1; at the segment join that
    target is the next seed's splitting.
    """
    out = []
    for t in range(segment.length):
        j = segment.start + t
        jac = f.at_step(j).jacobian(segment.points[t])
        out.append(block_decompose(jac, splittings[j], splittings[j + 1]))
    return tuple(out)


def pseudo_orbit_blocks(
    po: SegmentedPseudoOrbit, splittings: SplittingAssignment, f: SmoothMap
) -> tuple:
    """Per-segment tuples of derivative blocks for the whole pseudo-orbit."""
    if len(splittings) != po.n_steps + 1:
        raise ValueError("need one splitting per flattened index, closing point included")
    return tuple(segment_blocks(seg, splittings, f) for seg in po.segments())


def _segment_margin_rows(blocks, lam, epsilon, seg_index, start):
    n = len(blocks)
    a = np.array([min_norm(b.A) for b in blocks])
    d = np.array([op_norm(b.D) for b in blocks])
    off = np.array([max(op_norm(b.B), op_norm(b.C)) for b in blocks])
    log_lam = math.log(lam)
    with np.errstate(divide="ignore"):
        log_d = np.log(d)
        log_a = np.log(a)
    rows = []
    cum_d = np.cumsum(log_d)
    for k in range(1, n + 1):
        rhs = k * log_lam
        rows.append(MarginRow("contraction_product", seg_index, start + k,
                              float(cum_d[k - 1]), rhs, rhs - float(cum_d[k - 1])))
    tail_a = np.cumsum(log_a[::-1])[::-1]
    for k in range(n):
        rhs = (k - n) * log_lam
        rows.append(MarginRow("expansion_product", seg_index, start + k,
                              float(tail_a[k]), rhs, float(tail_a[k]) - rhs))
    lam2 = lam * lam
    for j in range(n):
        ratio = d[j] / a[j] if a[j] > 0 else math.inf
        rows.append(MarginRow("ratio", seg_index, start + j,
                              float(ratio), lam2, lam2 - float(ratio)))
        rows.append(MarginRow("offdiag", seg_index, start + j,
                              float(off[j]), epsilon, epsilon - float(off[j])))
    return rows


def _passed(rows, tol):
    margins = np.array([r.margin for r in rows])
    return bool(np.all(margins >= -tol))


def certify_segment(
    segment: OrbitSegment,
    splittings: SplittingAssignment,
    f: SmoothMap,
    lam: float,
    epsilon: float,
    blocks=None,
    tol: float = PASS_TOL,
) -> Certificate:
    """Check the four segment inequalities at rates (lam, epsilon)."""
    if not (0.0 < lam < 1.0):
        raise ValueError("lambda must lie in (0, 1)")
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    if blocks is None:
        blocks = segment_blocks(segment, splittings, f)
    rows = _segment_margin_rows(blocks, lam, epsilon, segment.index, segment.start)
    return Certificate(
        passed=_passed(rows, tol), lam=lam, epsilon=epsilon, delta=None,
        margins=tuple(rows), blocks=(tuple(blocks),), tol=tol,
    )


def certify_blocks(
    blocks_by_segment,
    residuals,
    po: SegmentedPseudoOrbit,
    lam: float,
    epsilon: float,
    delta: float,
    tol: float = PASS_TOL,
) -> Certificate:
    """Certification core on precomputed blocks (used on refined splittings too)."""
    if not (0.0 < lam < 1.0):
        raise ValueError("lambda must lie in (0, 1)")
    if epsilon < 0.0 or delta < 0.0:
        raise ValueError("epsilon and delta must be nonnegative")
    rows = []
    for seg, blocks in zip(po.segments(), blocks_by_segment):
        rows.extend(_segment_margin_rows(blocks, lam, epsilon, seg.index, seg.start))
    for seg, res in zip(po.segments(), residuals):
        rows.append(MarginRow("residual", seg.index, seg.start + seg.length,
                              float(res), delta, delta - float(res)))
    return Certificate(
        passed=_passed(rows, tol), lam=lam, epsilon=epsilon, delta=delta,
        margins=tuple(rows), blocks=tuple(tuple(b) for b in blocks_by_segment), tol=tol,
    )


def certify_pseudo_orbit(
    po: SegmentedPseudoOrbit,
    splittings: SplittingAssignment,
    f: SmoothMap,
    lam: float,
    epsilon: float,
    delta: float,
    blocks=None,
    tol: float = PASS_TOL,
) -> Certificate:
    """Certify every segment at (lam, epsilon) and every residual against delta."""
    if blocks is None:
        blocks = pseudo_orbit_blocks(po, splittings, f)
    return certify_blocks(blocks, po.residuals, po, lam, epsilon, delta, tol=tol)


def is_quasi_hyperbolic(cert: Certificate, tol: float = 1e-10) -> bool:
    """True when every off-diagonal block in the certificate is below tol."""
    if not cert.blocks:
        raise ValueError("certificate carries no blocks")
    worst = 0.0
    for seg_blocks in cert.blocks:
        for b in seg_blocks:
            worst = max(worst, op_norm(b.B), op_norm(b.C))
    return worst <= tol


def min_feasible_lambda(
    po: SegmentedPseudoOrbit,
    splittings: SplittingAssignment,
    f: SmoothMap,
    epsilon: float,
    tol: float = 1e-6,
    blocks=None,
) -> float | None:
    """Smallest lambda passing the non-residual conditions, by bisection.

    Every condition tightens monotonically as lambda decreases, so
    bisection on a pass/fail predicate is valid.  Returns None when even
    lambda = 1 - 1e-9 fails (including an epsilon-infeasible orbit).
    """
    if blocks is None:
        blocks = pseudo_orbit_blocks(po, splittings, f)
    flat = [b for seg in blocks for b in seg]
    if any(max(op_norm(b.B), op_norm(b.C)) > epsilon + PASS_TOL for b in flat):
        return None

    def feasible(lam: float) -> bool:
        for seg, seg_blocks in zip(po.segments(), blocks):
            rows = _segment_margin_rows(seg_blocks, lam, epsilon, seg.index, seg.start)
            if not _passed(rows, PASS_TOL):
                return False
        return True

    hi = 1.0 - 1e-9
    if not feasible(hi):
        return None
    lo = 1e-9
    if feasible(lo):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi
