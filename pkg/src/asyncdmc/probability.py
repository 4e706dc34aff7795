"""Finite-alphabet probability primitives: simplex points, channel kernels,
divergences, mutual information, sampling, and empirical types.

Conventions used throughout the package:

* All information quantities are in nats (natural logarithm).
* 0 * ln(0/q) = 0, and p > 0 with q = 0 gives +inf.  Infinity is a
  first-class return value (``math.inf``), never an exception.
* Alphabets are integer index sets {0, ..., k-1}; human-readable labels
  are an I/O concern, not handled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-12


def _as_simplex(values, what: str) -> np.ndarray:
    """Validate and normalize a probability vector.

    Entries must be >= 0 (tiny negative rounding noise below 1e-15 is
    clamped); the sum must be within SIMPLEX_TOL of 1, in which case the
    vector is renormalized exactly.  Larger deviations are rejected, since
    they signal malformed input rather than rounding.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"{what}: expected a non-empty 1-D probability vector")
    if np.any(v < -1e-15):
        raise ValueError(f"{what}: negative probability entry {v.min()!r}")
    v = np.where(v < 0.0, 0.0, v)
    s = float(v.sum())
    if abs(s - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"{what}: entries sum to {s!r}, not 1 within {SIMPLEX_TOL}")
    v = v / s
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class Distribution:
    """A point on a finite probability simplex."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_simplex(self.probs, "Distribution"))

    @property
    def size(self) -> int:
        return int(self.probs.size)

    @property
    def support(self) -> np.ndarray:
        return self.probs > 0.0

    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    @staticmethod
    def uniform(k: int) -> "Distribution":
        return Distribution(np.full(k, 1.0 / k))

    @staticmethod
    def point_mass(index: int, k: int) -> "Distribution":
        p = np.zeros(k)
        p[index] = 1.0
        return Distribution(p)


@dataclass(frozen=True)
class Kernel:
    """A stochastic matrix: one output distribution per input letter."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ValueError("Kernel: expected a non-empty 2-D stochastic matrix")
        rows = np.empty_like(m)
        for x in range(m.shape[0]):
            rows[x] = _as_simplex(m[x], f"Kernel row {x}")
        rows.setflags(write=False)
        object.__setattr__(self, "matrix", rows)

    @property
    def num_inputs(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def num_outputs(self) -> int:
        return int(self.matrix.shape[1])

    def row(self, x: int) -> Distribution:
        return Distribution(self.matrix[x])


@dataclass(frozen=True)
class ChannelModel:
    """A channel kernel together with its designated no-input letter.

    The no-input letter's row is the law of the pure-noise output observed
    outside the transmission window.
    """

    kernel: Kernel
    star_index: int

    def __post_init__(self):
        if not 0 <= self.star_index < self.kernel.num_inputs:
            raise ValueError(
                f"star_index {self.star_index} out of range for "
                f"{self.kernel.num_inputs} input letters"
            )

    @property
    def num_inputs(self) -> int:
        return self.kernel.num_inputs

    @property
    def num_outputs(self) -> int:
        return self.kernel.num_outputs

    @property
    def star_row(self) -> np.ndarray:
        return self.kernel.matrix[self.star_index]

    def star_dist(self) -> Distribution:
        return self.kernel.row(self.star_index)

    @staticmethod
    def bsc(crossover: float, star: int = 0) -> "ChannelModel":
        """Binary symmetric channel with the given crossover probability."""
        q = crossover
        return ChannelModel(Kernel(np.array([[1 - q, q], [q, 1 - q]])), star)


def _check_same_alphabet(p: Distribution, q: Distribution) -> None:
    if p.size != q.size:
        raise ValueError(f"alphabet mismatch: {p.size} vs {q.size}")


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """D(p || q) in nats; +inf when p puts mass outside q's support."""
    _check_same_alphabet(p, q)
    a, b = p.probs, q.probs
    on = a > 0.0
    if np.any(on & (b <= 0.0)):
        return math.inf
    return max(0.0, float(np.sum(a[on] * np.log(a[on] / b[on]))))


def conditional_kl(w: Kernel, q: Kernel, p: Distribution) -> float:
    """p-weighted average of the row divergences D(w(.|x) || q(.|x)).

    Rows with p(x) = 0 contribute nothing even if their divergence is +inf.
    """
    if w.matrix.shape != q.matrix.shape:
        raise ValueError(
            f"kernel shape mismatch: {w.matrix.shape} vs {q.matrix.shape}"
        )
    if p.size != w.num_inputs:
        raise ValueError(
            f"input alphabet mismatch: {p.size} vs {w.num_inputs}"
        )
    total = 0.0
    for x in range(w.num_inputs):
        px = p.probs[x]
        if px == 0.0:
            continue
        d = kl_divergence(w.row(x), q.row(x))
        if math.isinf(d):
            return math.inf
        total += px * d
    return total


def output_marginal(p: Distribution, q: Kernel) -> Distribution:
    """The output law sum_x p(x) q(.|x)."""
    if p.size != q.num_inputs:
        raise ValueError(f"dimension mismatch: {p.size} vs {q.num_inputs}")
    return Distribution(p.probs @ q.matrix)


def mutual_information(p: Distribution, q: Kernel) -> float:
    """I(p, q) in nats.  Always finite; zero-probability outputs drop out."""
    if p.size != q.num_inputs:
        raise ValueError(f"dimension mismatch: {p.size} vs {q.num_inputs}")
    m = p.probs @ q.matrix
    total = 0.0
    for x in range(q.num_inputs):
        px = p.probs[x]
        if px == 0.0:
            continue
        row = q.matrix[x]
        on = row > 0.0
        total += px * float(np.sum(row[on] * np.log(row[on] / m[on])))
    return max(0.0, total)


def sample(d: Distribution, rng, size: int | None = None):
    """Draw letter indices from ``d`` using ``rng``.

    ``rng`` is anything exposing ``random(size)`` returning uniforms in
    [0, 1) (numpy Generators and CounterRng both qualify).  Deterministic
    given the rng state.
    """
    c = d.cdf()
    if size is None:
        return int(np.searchsorted(c, rng.random(), side="right"))
    u = np.asarray(rng.random(size))
    return np.searchsorted(c, u, side="right").astype(np.int64)


@dataclass(frozen=True)
class ConditionalType:
    """Empirical conditional frequencies of outputs given inputs.

    Rows for input letters absent from the input sequence are undefined:
    they hold NaN and are flagged False in ``defined``.
    """

    counts: np.ndarray
    rows: np.ndarray
    defined: np.ndarray

    def kernel(self) -> Kernel:
        if not bool(self.defined.all()):
            missing = np.flatnonzero(~self.defined).tolist()
            raise ValueError(f"conditional type undefined for input letters {missing}")
        return Kernel(self.rows)


def empirical_conditional_type(
    x_seq,
    y_seq,
    num_inputs: int | None = None,
    num_outputs: int | None = None,
) -> ConditionalType:
    """Per-input-letter empirical output frequencies of a (x, y) sequence pair."""
    x = np.asarray(x_seq, dtype=np.int64)
    y = np.asarray(y_seq, dtype=np.int64)
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size == 0:
        raise ValueError("empty input sequence")
    nx = num_inputs if num_inputs is not None else int(x.max()) + 1
    ny = num_outputs if num_outputs is not None else int(y.max()) + 1
    if int(x.max()) >= nx or int(y.max()) >= ny:
        raise ValueError("letter index out of declared alphabet range")
    counts = np.zeros((nx, ny), dtype=np.int64)
    np.add.at(counts, (x, y), 1)
    row_tot = counts.sum(axis=1)
    defined = row_tot > 0
    rows = np.full((nx, ny), np.nan)
    rows[defined] = counts[defined] / row_tot[defined, None]
    return ConditionalType(counts=counts, rows=rows, defined=defined)


def simplex_grid(k: int, resolution: int) -> np.ndarray:
    """All points of the k-simplex with coordinates that are multiples of
    1/resolution, in lexicographic order.  Row count is C(resolution+k-1, k-1).
    """
    if k < 1:
        raise ValueError("alphabet size must be >= 1")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if k == 1:
        return np.ones((1, 1))
    parts = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            parts.append(prefix + [remaining])
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, slots - 1)

    rec([], resolution, k)
    return np.asarray(parts, dtype=np.float64) / float(resolution)
