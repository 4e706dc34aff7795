"""Codebooks and sequential decoders.

Two concrete schemes are provided:

* a training scheme: every codeword starts with a shared sync preamble of
  length floor(eta * N); a sliding log-likelihood-ratio test over the most
  recent preamble-length window decides when to stop, and the message is
  decoded by maximum likelihood from the symbols that follow.  The stop
  statistic reads nothing but the window, so window-only dependence holds
  by construction and is verified by exact replay tests.
* a joint scheme: no preamble; a sliding window of the last N symbols is
  scored against every codeword at once, and the decoder stops when the
  best score crosses the threshold.  Every codeword symbol contributes to
  both detection and decoding.

Decoders are stateful per-trial objects driven one symbol at a time through
``step``; the decision to stop after symbol n therefore depends only on the
symbols received so far.  Compiled batch scans equivalent to ``step`` live
in ``_kernels`` and are dispatched by the simulation harness; equivalence
is pinned by tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponents import minimax_exponent
from .probability import ChannelModel, Distribution
from .rng import CounterRng


def default_threshold(alpha: float, n: int, ln_coef: float = 1.0) -> float:
    """Union-bound stop-threshold sizing: alpha*N + ln_coef*ln(N) nats.

    A log-likelihood-ratio sum exceeds t under noise with probability at
    most e^-t, so across the ~e^(alpha*N) windows of one trial the false
    alarm probability is at most N^-ln_coef.  A heuristic default, not a
    tuned value.
    """
    if n < 1:
        raise ValueError("codeword length must be >= 1")
    return alpha * n + ln_coef * math.log(n)


@dataclass(frozen=True)
class Codebook:
    """M codewords of length N, the first ``preamble_len`` letters shared."""

    codewords: np.ndarray
    preamble_len: int

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=np.int64)
        if cw.ndim != 2 or cw.shape[0] < 1 or cw.shape[1] < 1:
            raise ValueError("codewords must be a non-empty (M, N) array")
        if not 0 <= self.preamble_len <= cw.shape[1]:
            raise ValueError("preamble_len out of range")
        if self.preamble_len > 0:
            head = cw[:, : self.preamble_len]
            if not np.all(head == head[0]):
                raise ValueError("codewords do not share the declared preamble")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    @property
    def num_messages(self) -> int:
        return int(self.codewords.shape[0])

    @property
    def length(self) -> int:
        return int(self.codewords.shape[1])

    @property
    def preamble(self) -> np.ndarray:
        return self.codewords[0, : self.preamble_len]

    def to_text(self) -> str:
        lines = [f"{self.length} {self.num_messages} {self.preamble_len}"]
        for row in self.codewords:
            lines.append(" ".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "Codebook":
        rows = [ln for ln in (s.strip() for s in text.splitlines()) if ln]
        if not rows:
            raise ValueError("empty codebook text")
        n, m, w = (int(v) for v in rows[0].split())
        if len(rows) != m + 1:
            raise ValueError(f"expected {m} codeword lines, found {len(rows) - 1}")
        cw = np.array([[int(v) for v in r.split()] for r in rows[1:]], dtype=np.int64)
        if cw.shape != (m, n):
            raise ValueError("codeword line lengths do not match the header")
        return Codebook(codewords=cw, preamble_len=w)


@dataclass(frozen=True)
class TrainingDecoderConfig:
    """Configuration of a training scheme (persisted form; threshold finite)."""

    eta: float
    threshold: float
    preamble_letter_rule: str = "max-divergence"

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if self.preamble_letter_rule not in ("max-divergence", "composition"):
            raise ValueError(f"unknown preamble rule {self.preamble_letter_rule!r}")


@dataclass(frozen=True)
class JointDecoderConfig:
    threshold: float

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")


def best_preamble_letter(ch: ChannelModel, tol: float = 1e-9) -> int:
    """Input letter whose output law is hardest to confuse with noise:
    argmax over x of minimax_exponent(Q(.|x), Q_star), ties to the lowest
    index."""
    star = ch.star_dist()
    vals = [minimax_exponent(ch.kernel.row(x), star, tol) for x in range(ch.num_inputs)]
    return int(np.argmax(vals))


def constant_composition_string(dist: Distribution, length: int) -> np.ndarray:
    """A string of the given length whose type is closest to ``dist``
    (largest-remainder rounding), letters emitted in index order."""
    if length < 0:
        raise ValueError("length must be >= 0")
    if length == 0:
        return np.zeros(0, dtype=np.int64)
    ideal = dist.probs * length
    counts = np.floor(ideal).astype(np.int64)
    short = length - int(counts.sum())
    if short > 0:
        order = np.argsort(-(ideal - counts), kind="stable")
        counts[order[:short]] += 1
    return np.repeat(np.arange(dist.size, dtype=np.int64), counts)


def build_training_codebook(
    ch: ChannelModel,
    n: int,
    m: int,
    eta: float,
    input_dist: Distribution,
    rng: CounterRng,
    preamble_dist: Distribution | None = None,
) -> Codebook:
    """Random training codebook: shared preamble of length floor(eta*n),
    information part i.i.d. from ``input_dist`` (random coding, distinctness
    not enforced)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if m < 2:
        raise ValueError("need at least 2 messages")
    w = int(math.floor(eta * n))
    if preamble_dist is None:
        pre = np.full(w, best_preamble_letter(ch), dtype=np.int64)
    else:
        if preamble_dist.size != ch.num_inputs:
            raise ValueError("preamble distribution over the wrong alphabet")
        pre = constant_composition_string(preamble_dist, w)
    info = _sample_matrix(input_dist, m, n - w, rng)
    cw = np.concatenate([np.tile(pre, (m, 1)), info], axis=1)
    return Codebook(codewords=cw, preamble_len=w)


def build_joint_codebook(
    n: int,
    m: int,
    input_dist: Distribution,
    rng: CounterRng,
) -> Codebook:
    """Preamble-free random codebook, entries i.i.d. from ``input_dist``."""
    if m < 2:
        raise ValueError("need at least 2 messages")
    return Codebook(codewords=_sample_matrix(input_dist, m, n, rng), preamble_len=0)


def _sample_matrix(dist: Distribution, rows: int, cols: int, rng: CounterRng) -> np.ndarray:
    if cols == 0:
        return np.zeros((rows, 0), dtype=np.int64)
    u = np.asarray(rng.random(rows * cols))
    return np.searchsorted(dist.cdf(), u, side="right").astype(np.int64).reshape(rows, cols)


def _log_probs(matrix: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(matrix > 0.0, np.log(np.where(matrix > 0.0, matrix, 1.0)), -np.inf)


def ml_decode(log_rows: np.ndarray, codeword_part: np.ndarray, window: np.ndarray) -> int:
    """argmax_m sum_j log Q(window_j | codeword_part[m, j]), ties to the
    lowest message index.

    Scores are accumulated per (input letter, output letter) cell count, so
    messages whose windows realize the same joint counts receive identical
    floats and ties resolve stably by index.
    """
    if codeword_part.shape[1] != window.size:
        raise ValueError(
            f"window length {window.size} does not match codeword part "
            f"{codeword_part.shape[1]}"
        )
    if window.size == 0:
        return 0
    nx, ny = log_rows.shape
    flat_log = log_rows.ravel()
    scores = np.empty(codeword_part.shape[0])
    for m in range(codeword_part.shape[0]):
        counts = np.bincount(codeword_part[m] * ny + window, minlength=nx * ny)
        on = counts > 0
        scores[m] = float(np.sum(counts[on] * flat_log[on]))
    return int(np.argmax(scores))


def training_decode_message(window: np.ndarray, codebook: Codebook, ch: ChannelModel) -> int:
    """ML decoding of the post-preamble information block."""
    w = codebook.preamble_len
    return ml_decode(_log_probs(ch.kernel.matrix), codebook.codewords[:, w:], np.asarray(window))


def _sum_llr(values: np.ndarray) -> float:
    """Window statistic with infinity semantics: an impossible-under-code
    symbol dominates (-inf, no fire); otherwise an impossible-under-noise
    symbol dominates (+inf, instant fire); otherwise the plain sum."""
    if np.any(np.isneginf(values)):
        return -math.inf
    if np.any(np.isposinf(values)):
        return math.inf
    return float(np.sum(values))


class TrainingDecoder:
    """Per-trial sequential decoder of a training scheme.

    ``step`` consumes one output symbol and returns the decoded message
    index when it stops, else None.  The stop time is detect time plus the
    information length N - w, where the detect statistic reads only the
    last w symbols.
    """

    def __init__(self, codebook: Codebook, ch: ChannelModel, threshold: float):
        self.codebook = codebook
        self.channel = ch
        self.threshold = float(threshold)
        self.w = codebook.preamble_len
        n = codebook.length
        pre = codebook.preamble
        logq = _log_probs(ch.kernel.matrix)
        with np.errstate(invalid="ignore"):
            self._llr_win = logq[pre, :] - _log_probs(ch.star_row)[None, :]
        # NaN only where both laws assign 0; such a symbol can never occur.
        self._llr_win = np.where(np.isnan(self._llr_win), -np.inf, self._llr_win)
        self._logq = logq
        self._ring = np.zeros(max(n, 1), dtype=np.int64)
        self._seen = 0
        self._detect_time: int | None = None
        self._info: list[int] = []
        self._int_mode = self._integer_mode()

    def _integer_mode(self):
        """(k_lo, k_hi) window one-counts that fire, when the statistic is
        integer-representable: constant preamble letter, binary outputs,
        finite ratios.  None otherwise."""
        if self.w == 0 or self.channel.num_outputs != 2:
            return None
        pre = self.codebook.preamble
        if not np.all(pre == pre[0]):
            return None
        llr0, llr1 = self._llr_win[0, 0], self._llr_win[0, 1]
        if not (math.isfinite(llr0) and math.isfinite(llr1)):
            return None
        if not math.isfinite(self.threshold):
            return None
        stats = np.arange(self.w + 1) * llr1 + (self.w - np.arange(self.w + 1)) * llr0
        fire = np.flatnonzero(stats >= self.threshold)
        if fire.size == 0:
            return (1, 0)  # empty range: never fires
        return (int(fire.min()), int(fire.max()))

    def window_decision(self, window: np.ndarray) -> bool:
        """Stop decision as a pure function of one w-length window."""
        window = np.asarray(window, dtype=np.int64)
        if window.size != self.w:
            raise ValueError(f"window length {window.size} != preamble length {self.w}")
        if self.w == 0:
            return False
        if self._int_mode is not None:
            k_lo, k_hi = self._int_mode
            c = int(np.sum(window))
            return k_lo <= c <= k_hi
        return _sum_llr(self._llr_win[np.arange(self.w), window]) >= self.threshold

    def detection_decisions(self, y) -> np.ndarray:
        """Decision bit for every full window of ``y`` (diagnostic helper)."""
        y = np.asarray(y, dtype=np.int64)
        if self.w == 0 or y.size < self.w:
            return np.zeros(0, dtype=bool)
        wins = np.lib.stride_tricks.sliding_window_view(y, self.w)
        return np.array([self.window_decision(win) for win in wins])

    def step(self, symbol: int) -> int | None:
        n = self.codebook.length
        self._ring[self._seen % self._ring.size] = symbol
        self._seen += 1
        if self._detect_time is None:
            if self.w > 0 and self._seen >= self.w and self.threshold != math.inf:
                if self.window_decision(self._last(self.w)):
                    self._detect_time = self._seen
                    if n - self.w == 0:
                        return training_decode_message(
                            np.zeros(0, dtype=np.int64), self.codebook, self.channel
                        )
            return None
        self._info.append(int(symbol))
        if len(self._info) == n - self.w:
            return training_decode_message(
                np.array(self._info, dtype=np.int64), self.codebook, self.channel
            )
        return None

    def force_decode(self) -> int:
        """Best message from the final N-symbol window (forced stop)."""
        n = self.codebook.length
        take = min(self._seen, n)
        return ml_decode(self._logq, self.codebook.codewords[:, n - take:], self._last(take))

    def _last(self, count: int) -> np.ndarray:
        idx = (np.arange(self._seen - count, self._seen)) % self._ring.size
        return self._ring[idx]


class JointDecoder:
    """Per-trial sequential joint sync-and-decode decoder.

    Scores the most recent N symbols against every codeword; stops at the
    first time the best score reaches the threshold, emitting the argmax
    (ties to the lowest index).
    """

    def __init__(self, codebook: Codebook, ch: ChannelModel, threshold: float):
        self.codebook = codebook
        self.channel = ch
        self.threshold = float(threshold)
        logq = _log_probs(ch.kernel.matrix)
        with np.errstate(invalid="ignore"):
            llr = logq - _log_probs(ch.star_row)[None, :]
        self._llr = np.where(np.isnan(llr), -np.inf, llr)
        self._logq = logq
        n = codebook.length
        self._ring = np.zeros(n, dtype=np.int64)
        self._seen = 0

    def window_scores(self, window: np.ndarray) -> np.ndarray:
        """Per-message score of one N-length window.

        Accumulated sequentially position by position; the compiled scan
        uses the same order, so the two paths agree bit for bit.
        """
        window = np.asarray(window, dtype=np.int64)
        n = self.codebook.length
        if window.size != n:
            raise ValueError(f"window length {window.size} != codeword length {n}")
        cw = self.codebook.codewords
        out = np.empty(cw.shape[0])
        for m in range(cw.shape[0]):
            vals = self._llr[cw[m], window]
            out[m] = _sum_llr_sequential(vals)
        return out

    def step(self, symbol: int) -> int | None:
        n = self.codebook.length
        self._ring[self._seen % n] = symbol
        self._seen += 1
        if self._seen < n or self.threshold == math.inf:
            return None
        scores = self.window_scores(self._last(n))
        best = int(np.argmax(scores))
        if scores[best] >= self.threshold:
            return best
        return None

    def force_decode(self) -> int:
        n = self.codebook.length
        take = min(self._seen, n)
        return ml_decode(self._logq, self.codebook.codewords[:, n - take:], self._last(take))

    def _last(self, count: int) -> np.ndarray:
        idx = (np.arange(self._seen - count, self._seen)) % self._ring.size
        return self._ring[idx]


def _sum_llr_sequential(values: np.ndarray) -> float:
    if np.any(np.isneginf(values)):
        return -math.inf
    if np.any(np.isposinf(values)):
        return math.inf
    s = 0.0
    for v in values:
        s += float(v)
    return s


class RandomGuessDecoder:
    """Baseline: stops on the first symbol with a uniformly random message."""

    def __init__(self, num_messages: int, rng: CounterRng):
        self._m = num_messages
        self._rng = rng
        self._guess: int | None = None

    def step(self, symbol: int) -> int | None:
        if self._guess is None:
            self._guess = self._rng.randint_below(self._m)
        return self._guess

    def force_decode(self) -> int:
        if self._guess is None:
            self._guess = self._rng.randint_below(self._m)
        return self._guess


@dataclass(frozen=True)
class ConditionThreeEstimate:
    """Monte-Carlo estimate of P(tau >= k+2N-1 | tau >= k+N, nu=k)."""

    estimate: float | None
    ci_low: float | None
    ci_high: float | None
    accepted: int
    probes: int
    k: int
    inconclusive: bool


def _wilson_interval(successes: int, n: int, z: float = 1.959963984540054):
    if n == 0:
        return (0.0, 1.0)
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def verify_condition_iii(
    cfg: TrainingDecoderConfig,
    codebook: Codebook,
    ch: ChannelModel,
    level: int,
    num_probes: int = 1000,
    seed: int = 0,
    k: int | None = None,
) -> ConditionThreeEstimate:
    """Estimate the late-stop probability of a training scheme by rejection.

    Simulates transmissions with the start time pinned at ``k`` under
    asynchronism level ``level``, keeps the probes where the preamble was
    effectively missed (tau >= k+N), and among those estimates the
    probability that the stop happens at or after k+2N-1, with a Wilson
    95% interval.  Fewer than 30 accepted probes yields an inconclusive
    result.
    """
    from .simulate import run_trial_raw  # local import: simulate builds on decoders

    n = codebook.length
    if num_probes < 100:
        raise ValueError("num_probes must be >= 100")
    if level < n + 1:
        raise ValueError("asynchronism level too small to place k + 2N - 1")
    if k is None:
        k = max(1, (level - n) // 2)
    if not 1 <= k <= level - n:
        raise ValueError(f"k must lie in [1, {level - n}]")

    root = CounterRng(seed)
    accepted = 0
    late = 0
    for j in range(num_probes):
        trial = root.spawn(1 + j)
        decoder = TrainingDecoder(codebook, ch, cfg.threshold)
        rec = run_trial_raw(ch, codebook, decoder, level, trial, nu=k)
        if rec.stop_time >= k + n:
            accepted += 1
            if rec.stop_time >= k + 2 * n - 1:
                late += 1
    if accepted < 30:
        return ConditionThreeEstimate(
            estimate=None, ci_low=None, ci_high=None,
            accepted=accepted, probes=num_probes, k=k, inconclusive=True,
        )
    lo, hi = _wilson_interval(late, accepted)
    return ConditionThreeEstimate(
        estimate=late / accepted, ci_low=lo, ci_high=hi,
        accepted=accepted, probes=num_probes, k=k, inconclusive=False,
    )
