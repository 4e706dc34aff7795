"""Flat declarative config files.

One ``key = value`` pair per line; ``#`` starts a comment.  Vectors are
whitespace-separated numbers, matrices use ``;`` between rows (row-major).
The full schema is documented in the README.  Parsing is strict: unknown
values fail where they are consumed, and malformed channel rows are
reported by row index.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .probability import ChannelModel, Distribution, Kernel
from .simulate import (
    DEFAULT_BUDGET_A,
    DEFAULT_BUDGET_DRAWS,
    ExperimentConfig,
)


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().lower().replace("-", "_")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())


def _get_float(cfg: dict, key: str, default: float | None = None) -> float | None:
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {cfg[key]!r}") from exc


def _get_int(cfg: dict, key: str, default: int | None = None) -> int | None:
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer: {cfg[key]!r}") from exc


def _get_bool(cfg: dict, key: str, default: bool) -> bool:
    if key not in cfg:
        return default
    v = cfg[key].lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {cfg[key]!r}")


def _get_vector(cfg: dict, key: str) -> np.ndarray | None:
    if key not in cfg:
        return None
    try:
        return np.array([float(v) for v in cfg[key].split()])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a numeric vector: {cfg[key]!r}") from exc


def _get_int_list(cfg: dict, key: str) -> list[int] | None:
    if key not in cfg:
        return None
    try:
        return [int(v) for v in cfg[key].split()]
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer list: {cfg[key]!r}") from exc


def channel_from_config(cfg: dict) -> ChannelModel:
    if "matrix" not in cfg:
        raise ConfigError("missing required key 'matrix'")
    rows = []
    for i, row_text in enumerate(cfg["matrix"].split(";")):
        try:
            row = [float(v) for v in row_text.split()]
        except ValueError as exc:
            raise ConfigError(f"matrix row {i}: not numeric: {row_text!r}") from exc
        if not row:
            raise ConfigError(f"matrix row {i}: empty")
        rows.append(row)
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"matrix rows have unequal lengths {sorted(widths)}")
    matrix = np.array(rows)
    for i, row in enumerate(matrix):
        s = float(row.sum())
        if abs(s - 1.0) > 1e-12:
            raise ConfigError(f"matrix row {i} sums to {s!r}, not 1")
        if np.any(row < 0):
            raise ConfigError(f"matrix row {i} has a negative entry")
    star = _get_int(cfg, "star", 0)
    try:
        return ChannelModel(Kernel(matrix), star)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _dist_from_key(cfg: dict, key: str, size: int) -> Distribution | None:
    if key not in cfg:
        return None
    if cfg[key].strip().lower() == "uniform":
        return Distribution.uniform(size)
    vec = _get_vector(cfg, key)
    if vec.size != size:
        raise ConfigError(f"{key}: expected {size} entries, got {vec.size}")
    try:
        return Distribution(vec)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def experiment_from_config(
    cfg: dict,
    seed_override: int | None = None,
    trials_override: int | None = None,
    budget_override: int | None = None,
) -> ExperimentConfig:
    ch = channel_from_config(cfg)
    n = _get_int(cfg, "n")
    if n is None:
        raise ConfigError("missing required key 'N'")
    trials = trials_override if trials_override is not None else _get_int(cfg, "trials", 1000)
    seed = seed_override if seed_override is not None else _get_int(cfg, "seed", 0)
    threshold_text = cfg.get("threshold", "auto").strip().lower()
    if threshold_text == "auto":
        threshold = None
    else:
        threshold = _get_float(cfg, "threshold")
        if threshold is not None and not math.isfinite(threshold):
            raise ConfigError("threshold must be finite (or 'auto')")
    budget_a = _get_int(cfg, "budget_a", DEFAULT_BUDGET_A)
    budget_draws = _get_int(cfg, "budget_draws", DEFAULT_BUDGET_DRAWS)
    if budget_override is not None:
        budget_a = max(budget_a, budget_override)
        budget_draws = max(budget_draws, budget_override)
    try:
        return ExperimentConfig(
            channel=ch,
            N=n,
            alpha=_get_float(cfg, "alpha", 0.0),
            num_trials=trials,
            decoder=cfg.get("decoder", "joint").strip().lower(),
            M=_get_int(cfg, "m", 2),
            seed=seed,
            eta=_get_float(cfg, "eta", 0.0),
            threshold=threshold,
            input_dist=_dist_from_key(cfg, "input_dist", ch.num_inputs),
            preamble_dist=_dist_from_key(cfg, "preamble_dist", ch.num_inputs),
            workers=_get_int(cfg, "workers", 1),
            budget_A=budget_a,
            budget_draws=budget_draws,
            keep_records=_get_bool(cfg, "keep_records", False),
            force_reference=_get_bool(cfg, "force_reference", False),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
