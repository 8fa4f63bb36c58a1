"""Pipeline configuration: a flat key=value file, every key overridable by
a command-line flag of the same name (dashes for underscores)."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .aligner import EmConfig
from .filtering import FilterConfig
from .projection import MODES


class ConfigError(ValueError):
    """Bad key, bad value, or unreadable config file; a usage error."""


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def _parse_opt_str(raw: str):
    return None if raw.lower() in ("", "none") else raw


def _parse_opt_int(raw: str):
    return None if raw.lower() in ("", "none") else int(raw)


#: key -> coercion from the raw config-file string
KEY_PARSERS = {
    "bitext": _parse_opt_str,
    "source": _parse_opt_str,
    "target": _parse_opt_str,
    "english_conll": _parse_opt_str,
    "workdir": str,
    "mode": str,
    "iterations": int,
    "prob_floor": float,
    "use_null": _parse_bool,
    "vocab_cap": _parse_opt_int,
    "keep_fraction": float,
    "no_entity_rate": float,
    "split_train": float,
    "split_dev": float,
    "split_test": float,
    "seed": int,
    "jobs": int,
    "forward_alignments": str,
    "backward_alignments": str,
    "external_tagger": _parse_opt_str,
}


@dataclass
class PipelineConfig:
    bitext: str | None = None
    source: str | None = None
    target: str | None = None
    english_conll: str | None = None
    workdir: str = "."
    mode: str = "intersected"
    iterations: int = 5
    prob_floor: float = 1e-12
    use_null: bool = True
    vocab_cap: int | None = None
    keep_fraction: float = 0.35
    no_entity_rate: float = 0.01
    split_train: float = 0.98
    split_dev: float = 0.01
    split_test: float = 0.01
    seed: int = 0
    jobs: int = 1
    forward_alignments: str = "builtin"
    backward_alignments: str = "builtin"
    external_tagger: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        ratios = (self.split_train, self.split_dev, self.split_test)
        if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigError(
                f"split ratios must be non-negative and sum to 1, got {ratios}"
            )
        # delegate range checks; EmConfig/FilterConfig raise ValueError
        try:
            self.em_config()
            self.filter_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def em_config(self) -> EmConfig:
        return EmConfig(
            iterations=self.iterations,
            prob_floor=self.prob_floor,
            use_null=self.use_null,
            vocab_cap=self.vocab_cap,
        )

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            keep_fraction=self.keep_fraction,
            no_entity_rate=self.no_entity_rate,
            seed=self.seed,
        )

    def split_ratios(self) -> tuple[float, float, float]:
        return (self.split_train, self.split_dev, self.split_test)

    def workpath(self, name: str) -> Path:
        return Path(self.workdir) / name


def parse_config(text: str) -> dict[str, str]:
    """Flat "key=value" lines; blank lines and #-comments ignored."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in KEY_PARSERS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def load_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))


def build_config(
    file_values: Mapping[str, str], overrides: Mapping[str, Any]
) -> PipelineConfig:
    """Typed config from file values plus CLI overrides (already typed;
    None means not given). Overrides win."""
    merged: dict[str, Any] = {}
    for key, raw in file_values.items():
        try:
            merged[key] = KEY_PARSERS[key](raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in KEY_PARSERS:
            raise ConfigError(f"unknown override {key!r}")
        merged[key] = value
    return PipelineConfig(**merged)
