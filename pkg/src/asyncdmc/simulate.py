"""Monte-Carlo harness for the asynchronous transmission process.

One trial: a message m and a start time nu are drawn uniformly and
independently; the receiver observes pure noise before and after an
N-symbol window starting at nu, in which the codeword of m is sent through
the channel; a sequential decoder consumes the output one symbol at a time
and its stop decision after symbol n may depend only on symbols 1..n.  If
the decoder never stops it is forced to decode at time A+N-1.

Randomness is counter-based throughout (`rng.CounterRng`): trial j of an
experiment uses substreams derived from (seed, j), so trials are
order-independent, parallelizable, and bit-identical across runs, chunk
sizes, and the compiled/reference execution paths.  Stream layout per
trial: substream 0 = message and start-time draws (counters 0 and 1),
substream 1 = channel output symbols (symbol t at counter t), substream 2
= decoder-internal randomness.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .decoders import (
    Codebook,
    JointDecoder,
    RandomGuessDecoder,
    TrainingDecoder,
    _log_probs,
    build_joint_codebook,
    build_training_codebook,
    default_threshold,
    ml_decode,
    training_decode_message,
)
from .exponents import training_bound_constant
from .probability import ChannelModel, Distribution
from .rng import CounterRng, bit_threshold, mix64, mix64_keys, uniforms_from_words

DEFAULT_BUDGET_A = 1 << 24
DEFAULT_BUDGET_DRAWS = 1 << 30
_CHUNK = 1 << 16

TRAINING = "training"
JOINT = "joint"
RANDOM_GUESS = "random-guess"


class BudgetExceededError(RuntimeError):
    """The configured asynchronism level or draw volume exceeds the budget."""


@dataclass(frozen=True)
class ExperimentConfig:
    channel: ChannelModel
    N: int
    alpha: float
    num_trials: int
    decoder: str
    M: int
    seed: int
    eta: float = 0.0
    threshold: float | None = None
    input_dist: Distribution | None = None
    preamble_dist: Distribution | None = None
    workers: int = 1
    budget_A: int = DEFAULT_BUDGET_A
    budget_draws: int = DEFAULT_BUDGET_DRAWS
    keep_records: bool = False
    force_reference: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.M < 2:
            raise ValueError("need at least 2 messages")
        if self.num_trials < 1:
            raise ValueError("need at least one trial")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.decoder not in (TRAINING, JOINT, RANDOM_GUESS):
            raise ValueError(f"unknown decoder kind {self.decoder!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def level(self) -> int:
        """The asynchronism level: ceil(exp(alpha * N)), budget-guarded."""
        log_a = self.alpha * self.N
        if log_a > math.log(self.budget_A) + 1e-12:
            raise BudgetExceededError(
                f"asynchronism level exp({log_a:.3f}) exceeds budget_A={self.budget_A}"
            )
        return max(1, int(math.ceil(math.exp(log_a) - 1e-12)))

    def check_budget(self) -> int:
        level = self.level()
        draws = (level + self.N - 1) * self.num_trials
        if draws > self.budget_draws:
            raise BudgetExceededError(
                f"{draws} symbol draws exceed budget_draws={self.budget_draws}"
            )
        return level

    def resolved_threshold(self) -> float:
        if self.threshold is not None:
            return self.threshold
        return default_threshold(self.alpha, self.N)

    def digest(self) -> str:
        payload = {
            "matrix": [[f"{v:.17g}" for v in row] for row in self.channel.kernel.matrix],
            "star": self.channel.star_index,
            "N": self.N,
            "alpha": f"{self.alpha:.17g}",
            "trials": self.num_trials,
            "decoder": self.decoder,
            "M": self.M,
            "seed": self.seed,
            "eta": f"{self.eta:.17g}",
            "threshold": None if self.threshold is None else f"{self.threshold:.17g}",
            "input_dist": None if self.input_dist is None
            else [f"{v:.17g}" for v in self.input_dist.probs],
            "preamble_dist": None if self.preamble_dist is None
            else [f"{v:.17g}" for v in self.preamble_dist.probs],
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class TrialRecord:
    message: int
    start_time: int
    stop_time: int
    decoded: int
    delay: int

    def __post_init__(self):
        if self.delay != max(0, self.stop_time - self.start_time):
            raise ValueError("delay must equal (stop_time - start_time)+")


@dataclass(frozen=True)
class ExperimentReport:
    error_rate: float
    mean_delay: float
    rate_nats: float | None
    trials: int
    level: int
    config_digest: str
    records: tuple[TrialRecord, ...] | None = None

    def to_json_dict(self) -> dict:
        out = {
            "error_rate": self.error_rate,
            "mean_delay": self.mean_delay,
            "rate_nats": self.rate_nats,
            "trials": self.trials,
            "level": self.level,
            "config_digest": self.config_digest,
        }
        if self.records is not None:
            out["records"] = [
                {
                    "message": r.message,
                    "start_time": r.start_time,
                    "stop_time": r.stop_time,
                    "decoded": r.decoded,
                    "delay": r.delay,
                }
                for r in self.records
            ]
        return out


class OutputStream:
    """The counter-indexed channel output sequence of one trial.

    Symbol t (0-based) is a pure function of the stream key and t, so the
    sequence is identical whether materialized at once, produced lazily,
    or regenerated piecewise, and any window can be re-read in O(1).
    """

    def __init__(self, ch: ChannelModel, codeword: np.ndarray, nu: int, level: int,
                 rng: CounterRng):
        codeword = np.asarray(codeword, dtype=np.int64)
        if codeword.ndim != 1 or codeword.size < 1:
            raise ValueError("codeword must be a non-empty 1-D letter sequence")
        if not 1 <= nu <= level:
            raise ValueError(f"start time {nu} outside [1, {level}]")
        self.channel = ch
        self.codeword = codeword
        self.nu = nu
        self.level = level
        self.length = level + codeword.size - 1
        self._rng = rng
        cdf = np.cumsum(ch.kernel.matrix, axis=1)
        cdf[:, -1] = 1.0
        self._cdf = cdf

    def chunk(self, start: int, stop: int) -> np.ndarray:
        if not 0 <= start <= stop <= self.length:
            raise ValueError("chunk out of stream range")
        count = stop - start
        u = self._rng.uniforms_at(start, count)
        out = np.empty(count, dtype=np.int64)
        nu0 = self.nu - 1
        n = self.codeword.size
        pos = np.arange(start, stop)
        in_code = (pos >= nu0) & (pos < nu0 + n)
        noise = ~in_code
        star_cdf = self._cdf[self.channel.star_index]
        out[noise] = np.searchsorted(star_cdf, u[noise], side="right")
        if in_code.any():
            letters = self.codeword[pos[in_code] - nu0]
            uc = u[in_code]
            sub = np.empty(uc.size, dtype=np.int64)
            for letter in np.unique(letters):
                mask = letters == letter
                sub[mask] = np.searchsorted(self._cdf[letter], uc[mask], side="right")
            out[in_code] = sub
        return out

    def materialize(self) -> np.ndarray:
        return self.chunk(0, self.length)

    def iter_symbols(self, chunk_size: int = _CHUNK):
        for start in range(0, self.length, chunk_size):
            for s in self.chunk(start, min(start + chunk_size, self.length)):
                yield int(s)


def generate_output_stream(ch: ChannelModel, codeword, nu: int, level: int,
                           rng: CounterRng) -> np.ndarray:
    """Materialized output sequence of length level + N - 1: noise outside
    positions [nu, nu+N-1] (1-based), the codeword image inside."""
    return OutputStream(ch, codeword, nu, level, rng).materialize()


def iter_output_stream(ch: ChannelModel, codeword, nu: int, level: int,
                       rng: CounterRng, chunk_size: int = _CHUNK):
    """Lazy counterpart of `generate_output_stream`; same symbols."""
    return OutputStream(ch, codeword, nu, level, rng).iter_symbols(chunk_size)


def run_trial_raw(ch: ChannelModel, codebook: Codebook, decoder, level: int,
                  rng: CounterRng, nu: int | None = None,
                  message: int | None = None) -> TrialRecord:
    """Reference per-symbol trial: stream the output to ``decoder.step``
    until it stops, forcing a decode at time level+N-1 if it never does.

    O(level) python-level steps; experiments at large levels go through
    `run_experiment`, which dispatches compiled scans with identical
    outcomes.
    """
    draw = rng.spawn(0)
    m = draw.randint_below(codebook.num_messages) if message is None else int(message)
    start = (1 + draw.randint_below(level)) if nu is None else int(nu)
    stream = OutputStream(ch, codebook.codewords[m], start, level, rng.spawn(1))
    stop = stream.length
    decoded: int | None = None
    t = 0
    for sym in stream.iter_symbols():
        t += 1
        result = decoder.step(sym)
        if result is not None:
            stop = t
            decoded = int(result)
            break
    if decoded is None:
        decoded = int(decoder.force_decode())
    return TrialRecord(
        message=m, start_time=start, stop_time=stop, decoded=decoded,
        delay=max(0, stop - start),
    )


def run_trial(cfg: ExperimentConfig, decoder, codebook: Codebook, rng: CounterRng,
              nu: int | None = None, message: int | None = None) -> TrialRecord:
    return run_trial_raw(cfg.channel, codebook, decoder, cfg.level(), rng, nu, message)


def build_codebook(cfg: ExperimentConfig, rng: CounterRng) -> Codebook:
    dist = cfg.input_dist or Distribution.uniform(cfg.channel.num_inputs)
    if cfg.decoder == TRAINING:
        return build_training_codebook(
            cfg.channel, cfg.N, cfg.M, cfg.eta, dist, rng, cfg.preamble_dist
        )
    return build_joint_codebook(cfg.N, cfg.M, dist, rng)


def make_decoder(cfg: ExperimentConfig, codebook: Codebook, trial_rng: CounterRng):
    """Fresh per-trial decoder instance for the configured scheme."""
    thr = cfg.resolved_threshold()
    if cfg.decoder == TRAINING:
        return TrainingDecoder(codebook, cfg.channel, thr)
    if cfg.decoder == JOINT:
        return JointDecoder(codebook, cfg.channel, thr)
    return RandomGuessDecoder(cfg.M, trial_rng.spawn(2))


def _trial_draws(cfg: ExperimentConfig, level: int):
    """Vectorized per-trial substream keys and (message, start-time) draws.

    Mirrors exactly the scalar chain CounterRng(seed).spawn(1+j), where
    spawn(0) yields the draw stream (counters 0 and 1), spawn(1) the symbol
    stream, and spawn(2) the decoder stream.
    """
    root = CounterRng(cfg.seed)
    trial_keys = mix64(root.key, np.arange(1, cfg.num_trials + 1, dtype=np.uint64))
    draw_keys = mix64_keys(trial_keys, 0)
    sym_keys = mix64_keys(trial_keys, 1)
    aux_keys = mix64_keys(trial_keys, 2)
    u_m = uniforms_from_words(mix64_keys(draw_keys, 0))
    u_nu = uniforms_from_words(mix64_keys(draw_keys, 1))
    msgs = np.minimum((u_m * cfg.M).astype(np.int64), cfg.M - 1)
    nus = 1 + np.minimum((u_nu * level).astype(np.int64), level - 1)
    return trial_keys, sym_keys, aux_keys, msgs, nus


def _fast_scan_available(cfg: ExperimentConfig, codebook: Codebook, threshold: float) -> bool:
    """Compiled scans cover binary-output channels with finite statistics."""
    if cfg.force_reference or cfg.channel.num_outputs != 2:
        return False
    if not math.isfinite(threshold):
        return False
    if cfg.decoder == TRAINING:
        if codebook.preamble_len == 0:
            return True  # no detector; every trial is a forced decode
        probe = TrainingDecoder(codebook, cfg.channel, threshold)
        return probe._int_mode is not None
    if cfg.decoder == JOINT:
        logq = _log_probs(cfg.channel.kernel.matrix)
        star = _log_probs(cfg.channel.star_row)
        return bool(np.isfinite(logq).all() and np.isfinite(star).all())
    return False


def _joint_prune_table(llr: np.ndarray, codewords: np.ndarray, threshold: float) -> np.ndarray:
    """prune_open[c] = True iff a window with c ones could reach the
    threshold for some codeword: a sound necessary condition from the best
    assignment of c ones to codeword positions (greedy on per-letter
    llr gains), with a small slack for float ordering."""
    n = codewords.shape[1]
    open_table = np.zeros(n + 1, dtype=bool)
    best = np.full(n + 1, -np.inf)
    for m in range(codewords.shape[0]):
        row = codewords[m]
        base = float(llr[row, 0].sum())
        gains = np.sort(llr[row, 1] - llr[row, 0])[::-1]
        vals = base + np.concatenate([[0.0], np.cumsum(gains)])
        best = np.maximum(best, vals)
    open_table = best >= threshold - 1e-6
    return open_table


def _bit_thresholds(cfg: ExperimentConfig, codebook: Codebook):
    """53-bit integer Bernoulli thresholds for the noise law and for every
    codeword position of every message (binary-output channels)."""
    cdf0 = cfg.channel.kernel.matrix[:, 0]
    per_letter = np.array([bit_threshold(float(v)) for v in cdf0], dtype=np.uint64)
    thr_noise = per_letter[cfg.channel.star_index]
    thr_code = per_letter[codebook.codewords]
    return thr_noise, thr_code


def _run_trials_fast(cfg: ExperimentConfig, codebook: Codebook, threshold: float,
                     level: int, sym_keys, msgs, nus):
    """Batch-scan all trials with the compiled kernels, then finish each
    trial (message decode, forced decode) with the shared numpy helpers."""
    import numba

    from . import _kernels

    n = cfg.N
    length = level + n - 1
    thr_noise, thr_code = _bit_thresholds(cfg, codebook)
    nu0s = (nus - 1).astype(np.int64)

    old_threads = numba.get_num_threads()
    numba.set_num_threads(max(1, min(cfg.workers, numba.config.NUMBA_NUM_THREADS)))
    try:
        if cfg.decoder == TRAINING:
            w = codebook.preamble_len
            if w == 0:
                detect = np.full(cfg.num_trials, -1, dtype=np.int64)
            else:
                probe = TrainingDecoder(codebook, cfg.channel, threshold)
                k_lo, k_hi = probe._int_mode
                detect = _kernels.scan_training_batch(
                    sym_keys, nu0s, msgs.astype(np.int64), level, n, w,
                    k_lo, k_hi, thr_noise, thr_code,
                )
            stops = np.empty(cfg.num_trials, dtype=np.int64)
            decoded = np.empty(cfg.num_trials, dtype=np.int64)
            logq = _log_probs(cfg.channel.kernel.matrix)
            n_info = n - w
            for i in range(cfg.num_trials):
                stream = OutputStream(
                    cfg.channel, codebook.codewords[msgs[i]], int(nus[i]), level,
                    CounterRng(_key=int(sym_keys[i])),
                )
                d = int(detect[i])
                if d >= 0 and d + 1 + n_info <= length:
                    stops[i] = d + 1 + n_info
                    decoded[i] = training_decode_message(
                        stream.chunk(d + 1, d + 1 + n_info), codebook, cfg.channel
                    )
                else:
                    stops[i] = length
                    decoded[i] = ml_decode(
                        logq, codebook.codewords, stream.chunk(length - n, length)
                    )
            return stops, decoded
        # joint
        logq = _log_probs(cfg.channel.kernel.matrix)
        llr = logq - _log_probs(cfg.channel.star_row)[None, :]
        prune = _joint_prune_table(llr, codebook.codewords, threshold)
        stop0, best_m = _kernels.scan_joint_batch(
            sym_keys, nu0s, msgs.astype(np.int64), level, n,
            thr_noise, thr_code, prune, llr, codebook.codewords, threshold,
        )
        stops = np.where(stop0 >= 0, stop0 + 1, length).astype(np.int64)
        decoded = best_m.copy()
        for i in np.flatnonzero(stop0 < 0):
            stream = OutputStream(
                cfg.channel, codebook.codewords[msgs[i]], int(nus[i]), level,
                CounterRng(_key=int(sym_keys[i])),
            )
            decoded[i] = ml_decode(
                logq, codebook.codewords, stream.chunk(length - n, length)
            )
        return stops, decoded
    finally:
        numba.set_num_threads(old_threads)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run num_trials independent trials and aggregate error rate, mean
    reaction delay, and the induced rate ln(M)/mean_delay."""
    level = cfg.check_budget()
    root = CounterRng(cfg.seed)
    codebook = build_codebook(cfg, root.spawn(0))
    threshold = cfg.resolved_threshold()
    trial_keys, sym_keys, aux_keys, msgs, nus = _trial_draws(cfg, level)

    if cfg.decoder == RANDOM_GUESS:
        guesses = np.minimum(
            (uniforms_from_words(mix64_keys(aux_keys, 0)) * cfg.M).astype(np.int64),
            cfg.M - 1,
        )
        stops = np.ones(cfg.num_trials, dtype=np.int64)
        decoded = guesses
    elif _fast_scan_available(cfg, codebook, threshold):
        stops, decoded = _run_trials_fast(
            cfg, codebook, threshold, level, sym_keys, msgs, nus
        )
    else:
        stops = np.empty(cfg.num_trials, dtype=np.int64)
        decoded = np.empty(cfg.num_trials, dtype=np.int64)
        for j in range(cfg.num_trials):
            trial = root.spawn(1 + j)
            dec = make_decoder(cfg, codebook, trial)
            rec = run_trial_raw(cfg.channel, codebook, dec, level, trial)
            stops[j] = rec.stop_time
            decoded[j] = rec.decoded
            if rec.message != msgs[j] or rec.start_time != nus[j]:
                raise AssertionError("trial draw derivation out of sync")

    delays = np.maximum(0, stops - nus)
    errors = decoded != msgs
    mean_delay = float(np.mean(delays))
    rate = math.log(cfg.M) / mean_delay if mean_delay > 0 else None
    records = None
    if cfg.keep_records:
        records = tuple(
            TrialRecord(
                message=int(msgs[j]), start_time=int(nus[j]),
                stop_time=int(stops[j]), decoded=int(decoded[j]),
                delay=int(delays[j]),
            )
            for j in range(cfg.num_trials)
        )
    return ExperimentReport(
        error_rate=float(np.mean(errors)),
        mean_delay=mean_delay,
        rate_nats=rate,
        trials=cfg.num_trials,
        level=level,
        config_digest=cfg.digest(),
        records=records,
    )


@dataclass(frozen=True)
class DelayGrowthRow:
    N: int
    level: int
    trials: int
    mean_delay: float
    error_rate: float


DELAY_GROWTH_MAX_A = 1 << 28
DELAY_GROWTH_MAX_DRAWS = 1 << 41


def delay_growth_experiment(
    ch: ChannelModel,
    eta: float,
    alpha: float,
    n_list,
    trials_per_n: int,
    seed: int,
    decoder: str = TRAINING,
    m_messages: int = 2,
    input_dist: Distribution | None = None,
    threshold_ln_coef: float = 1.0,
    workers: int = 1,
) -> list[DelayGrowthRow]:
    """Reaction-delay trend of a scheme as the codeword length grows at a
    fixed asynchronism exponent.

    For the training scheme the exponent must exceed eta times the
    training-bound constant (the regime in which the scheme is doomed);
    violating that raises with the computed threshold.  The rows report
    measured data only; growth assertions live in the test suite.
    """
    n_list = [int(v) for v in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("N_list must be strictly increasing")
    if decoder == TRAINING:
        const = training_bound_constant(ch)
        floor = 0.0 if eta == 0.0 else eta * const
        if not alpha > floor:
            raise ValueError(
                f"alpha={alpha:.6g} not above the regime threshold "
                f"eta * training_bound_constant = {floor:.6g}"
            )
    rows = []
    from .rng import mix64_scalar

    for n in n_list:
        cfg = ExperimentConfig(
            channel=ch,
            N=n,
            alpha=alpha,
            num_trials=trials_per_n,
            decoder=decoder,
            M=m_messages,
            seed=mix64_scalar(mix64_scalar(seed, 0), n),
            eta=eta if decoder == TRAINING else 0.0,
            threshold=default_threshold(alpha, n, threshold_ln_coef),
            input_dist=input_dist,
            workers=workers,
            budget_A=DELAY_GROWTH_MAX_A,
            budget_draws=DELAY_GROWTH_MAX_DRAWS,
        )
        report = run_experiment(cfg)
        rows.append(
            DelayGrowthRow(
                N=n, level=report.level, trials=trials_per_n,
                mean_delay=report.mean_delay, error_rate=report.error_rate,
            )
        )
    return rows
