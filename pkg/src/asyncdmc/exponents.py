"""Asynchronism-exponent computations.

Two families of quantities are produced for a channel (Q, star):

* the achievable exponent of joint sync-and-decode schemes, per input
  distribution P:  min over output laws V of max{D(V||(PQ)_Y), D(V||Q_star)},
  swept over P to build a rate/exponent envelope;
* the training-scheme limit:  (1 - R/C) * max_P min_W max{D(W||Q|P),
  D(W||Q_star|P)}, which is linear in rate and vanishes at capacity.

The inner min-max problems are solved through their Lagrangian dual: for
weight lam in [0, 1] the minimizing law is the normalized geometric mixture
a^lam * b^(1-lam), whose value is -ln sum_y a(y)^lam b(y)^(1-lam), a concave
function of lam maximized by golden-section search.  For the training
constant the per-letter duals are linear in P, so the outer maximum sits at
a vertex of the input simplex.  Both reductions are cross-checked against
exhaustive grid oracles (`brute_force_minimax`,
`brute_force_training_constant`) that share nothing with the duals.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .capacity import compute_capacity
from .probability import (
    ChannelModel,
    Distribution,
    mutual_information,
    output_marginal,
    simplex_grid,
)

ACHIEVABLE = "achievable"
TRAINING_BOUND = "training-bound"

RATE_BUCKET = 1e-4  # envelope rates are rounded to this grid (nats)

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def channel_digest(ch: ChannelModel) -> str:
    """Stable short identifier of a channel (matrix to 12 significant digits)."""
    payload = {
        "matrix": [[f"{v:.12g}" for v in row] for row in ch.kernel.matrix],
        "star": ch.star_index,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _geometric_mixture_value(la: np.ndarray, lb: np.ndarray, lam: float) -> float:
    """-ln sum exp(lam*la + (1-lam)*lb), the dual value at weight lam."""
    x = lam * la + (1.0 - lam) * lb
    m = float(x.max())
    return -(m + math.log(float(np.exp(x - m).sum())))


def minimax_exponent(a: Distribution, b: Distribution, tol: float = 1e-9) -> float:
    """min over laws V of max{D(V||a), D(V||b)}; +inf iff supports are disjoint.

    Computed as the maximum over lam in [0, 1] of the concave dual
    -ln sum_y a^lam b^(1-lam) (sums over the common support), located by
    golden-section search to interval width ``tol``.
    """
    if a.size != b.size:
        raise ValueError(f"alphabet mismatch: {a.size} vs {b.size}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    pa, pb = a.probs, b.probs
    if np.array_equal(pa, pb):
        return 0.0
    # Canonical argument order makes the symmetry max{.,.} exact in floats.
    for x, y in zip(pa, pb):
        if x != y:
            if x < y:
                pa, pb = pb, pa
            break
    common = (pa > 0.0) & (pb > 0.0)
    if not bool(common.any()):
        return math.inf
    la = np.log(pa[common])
    lb = np.log(pb[common])

    lo, hi = 0.0, 1.0
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc = _geometric_mixture_value(la, lb, c)
    fd = _geometric_mixture_value(la, lb, d)
    while hi - lo > tol:
        if fc < fd:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = _geometric_mixture_value(la, lb, d)
        else:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = _geometric_mixture_value(la, lb, c)
    best = max(
        _geometric_mixture_value(la, lb, 0.0),
        _geometric_mixture_value(la, lb, 1.0),
        _geometric_mixture_value(la, lb, 0.5 * (lo + hi)),
    )
    return max(0.0, best)


def achievable_exponent(ch: ChannelModel, p: Distribution, tol: float = 1e-9) -> float:
    """Exponent of the joint scheme at input law p: minimax of the induced
    output law against the pure-noise law."""
    return minimax_exponent(output_marginal(p, ch.kernel), ch.star_dist(), tol)


def training_bound_constant(ch: ChannelModel, tol: float = 1e-9) -> float:
    """max_P min_W max{D(W||Q|P), D(W||Q_star|P)}.

    The per-letter duals are linear in P, so the maximum is attained at a
    vertex: the value is max_x minimax_exponent(Q(.|x), Q_star).  Returns
    +inf iff some input row's support is disjoint from the noise row's.
    """
    star = ch.star_dist()
    return max(
        minimax_exponent(ch.kernel.row(x), star, tol)
        for x in range(ch.num_inputs)
    )


@dataclass(frozen=True)
class ExponentCurve:
    """A sampled rate -> exponent function with provenance."""

    rates: np.ndarray
    alphas: np.ndarray
    kind: str
    channel_digest: str
    degenerate: bool = False

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=np.float64)
        a = np.asarray(self.alphas, dtype=np.float64)
        if r.shape != a.shape or r.ndim != 1:
            raise ValueError("rates and alphas must be matching 1-D arrays")
        if np.any(np.diff(r) < 0):
            raise ValueError("rates must be non-decreasing")
        if np.any(a < 0):
            raise ValueError("exponents must be non-negative")
        if self.kind not in (ACHIEVABLE, TRAINING_BOUND):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        r.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "rates", r)
        object.__setattr__(self, "alphas", a)

    def alpha_at(self, rate: float) -> float:
        """Evaluate the curve at a rate.

        Achievable curves are right-max staircases: the value at R is the
        largest sampled exponent at any rate >= R (slack 1e-7 absorbs
        rounding of the query rate).  Training curves are linear and are
        evaluated at the nearest sample.
        """
        i = int(np.searchsorted(self.rates, rate - 1e-7, side="left"))
        if i >= self.rates.size:
            i = self.rates.size - 1
        if self.kind == TRAINING_BOUND:
            j = int(np.argmin(np.abs(self.rates - rate)))
            return float(self.alphas[j])
        return float(self.alphas[i])

    def to_json_dict(self) -> dict:
        def enc(v: float):
            return None if math.isinf(v) else v

        return {
            "kind": self.kind,
            "channel_digest": self.channel_digest,
            "degenerate": self.degenerate,
            "points": [
                {"rate_nats": float(r), "alpha": enc(float(a))}
                for r, a in zip(self.rates, self.alphas)
            ],
        }

    def to_csv_lines(self) -> list[str]:
        lines = [f"# kind={self.kind} channel={self.channel_digest} degenerate={str(self.degenerate).lower()}"]
        lines.append("rate_nats,alpha,kind")
        for r, a in zip(self.rates, self.alphas):
            alpha = "inf" if math.isinf(a) else f"{a:.12g}"
            lines.append(f"{r:.12g},{alpha},{self.kind}")
        return lines


def achievable_curve(
    ch: ChannelModel,
    grid_resolution: int = 50,
    tol: float = 1e-9,
) -> ExponentCurve:
    """Upper envelope of (rate, exponent) pairs over an input-simplex sweep.

    Sweeps input laws over a simplex grid, adds the capacity-achieving
    input from the capacity solver, buckets rates to RATE_BUCKET keeping
    the best exponent per bucket, then takes the running maximum from the
    high-rate end: an exponent achievable at some rate is achievable at
    every lower rate (drop messages from the codebook), so the envelope is
    non-increasing by construction.
    """
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    pts = simplex_grid(ch.num_inputs, grid_resolution)
    cap = compute_capacity(ch, tol=min(1e-9, tol))
    sweep: list[tuple[float, float]] = []
    for row in pts:
        p = Distribution(row)
        sweep.append(
            (mutual_information(p, ch.kernel), achievable_exponent(ch, p, tol))
        )
    sweep.append(
        (cap.capacity_nats, achievable_exponent(ch, cap.input_dist, tol))
    )

    buckets: dict[int, float] = {}
    for rate, alpha in sweep:
        key = int(round(rate / RATE_BUCKET))
        if alpha > buckets.get(key, -1.0):
            buckets[key] = alpha
    keys = sorted(buckets)
    rates = np.array([k * RATE_BUCKET for k in keys])
    alphas = np.array([buckets[k] for k in keys])
    alphas = np.maximum.accumulate(alphas[::-1])[::-1]
    degenerate = bool(np.isinf(alphas).any())
    return ExponentCurve(
        rates=rates,
        alphas=alphas,
        kind=ACHIEVABLE,
        channel_digest=channel_digest(ch),
        degenerate=degenerate,
    )


def training_bound_curve(
    ch: ChannelModel,
    num_points: int = 33,
    tol: float = 1e-9,
) -> ExponentCurve:
    """The training-scheme limit (1 - R/C) * constant on a uniform rate grid.

    When the constant is +inf the curve is +inf everywhere and carries the
    degenerate flag; otherwise the endpoint at capacity is exactly 0.
    """
    if num_points < 2:
        raise ValueError("num_points must be >= 2")
    cap = compute_capacity(ch, tol=min(1e-9, tol))
    const = training_bound_constant(ch, tol)
    rates = np.linspace(0.0, cap.capacity_nats, num_points)
    if math.isinf(const):
        alphas = np.full(num_points, math.inf)
        degenerate = True
    else:
        alphas = const * (1.0 - rates / cap.capacity_nats) if cap.capacity_nats > 0 \
            else np.full(num_points, const)
        alphas[-1] = 0.0 if cap.capacity_nats > 0 else alphas[-1]
        alphas = np.maximum(alphas, 0.0)
        degenerate = False
    return ExponentCurve(
        rates=rates,
        alphas=alphas,
        kind=TRAINING_BOUND,
        channel_digest=channel_digest(ch),
        degenerate=degenerate,
    )


def brute_force_minimax(a: Distribution, b: Distribution, grid_step: float) -> float:
    """Exhaustive minimization of max{D(V||a), D(V||b)} over a simplex grid.

    Independent oracle for `minimax_exponent`: never below the true
    minimum, within O(grid_step) of it for interior optima.  Exponential
    in the alphabet size, hence the size cap.
    """
    if a.size != b.size:
        raise ValueError(f"alphabet mismatch: {a.size} vs {b.size}")
    if a.size > 4:
        raise ValueError("oracle limited to alphabets of size <= 4")
    if not 0.0 < grid_step <= 0.1:
        raise ValueError("grid_step must be in (0, 0.1]")
    res = round(1.0 / grid_step)
    grid = simplex_grid(a.size, res)
    da = _grid_divergences(grid, a.probs)
    db = _grid_divergences(grid, b.probs)
    return float(np.minimum.reduce(np.maximum(da, db)))


def _grid_divergences(grid: np.ndarray, target: np.ndarray) -> np.ndarray:
    """D(v || target) for every grid row v, with 0 ln 0 = 0 and /0 = +inf."""
    pos = grid > 0.0
    out = np.zeros(grid.shape[0])
    bad = np.any(pos & (target[None, :] <= 0.0), axis=1)
    safe_target = np.where(target > 0.0, target, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, grid * np.log(grid / safe_target[None, :]), 0.0)
    out = terms.sum(axis=1)
    out[bad] = math.inf
    return out


def brute_force_training_constant(
    ch: ChannelModel,
    grid_step: float,
    vertex_only: bool = False,
) -> float:
    """Exhaustive search for max_P min_W max{D(W||Q|P), D(W||Q_star|P)}.

    P ranges over a simplex grid (or just the vertices when
    ``vertex_only``), W over the product of per-row simplex grids.  Oracle
    for the vertex/duality reduction in `training_bound_constant`; limited
    to tiny alphabets.
    """
    nx, ny = ch.num_inputs, ch.num_outputs
    if nx > 3 or ny > 3:
        raise ValueError("oracle limited to at most 3 input and 3 output letters")
    if not 0.0 < grid_step <= 0.1:
        raise ValueError("grid_step must be in (0, 0.1]")
    res = round(1.0 / grid_step)
    rows = simplex_grid(ny, res)
    d_q = [_grid_divergences(rows, ch.kernel.matrix[x]) for x in range(nx)]
    d_star = _grid_divergences(rows, ch.star_row)
    if vertex_only:
        p_grid = np.eye(nx)
    else:
        p_grid = simplex_grid(nx, res)

    zeros = np.zeros(rows.shape[0])
    best_over_p = 0.0
    for p in p_grid:
        # Accumulate the two weighted sums one W row at a time; the running
        # pair (D1, D2) stays a dense array over joint row choices.
        acc1 = np.zeros(1)
        acc2 = np.zeros(1)
        for x in range(nx):
            t1 = p[x] * d_q[x] if p[x] > 0 else zeros
            t2 = p[x] * d_star if p[x] > 0 else zeros
            acc1 = (acc1[:, None] + t1[None, :]).ravel()
            acc2 = (acc2[:, None] + t2[None, :]).ravel()
        inner = float(np.minimum.reduce(np.maximum(acc1, acc2)))
        if inner > best_over_p:
            best_over_p = inner
    return best_over_p
