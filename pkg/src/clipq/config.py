"""Hyperparameters and run configuration (key-value file + overrides)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Hyperparams:
    """Single source of configuration truth for training and retrieval.

    `m` is the number of codebooks; with `k` codewords each, an item's code
    occupies m * log2(k) bits.  `dim` is the projection-head output width D
    (None means: use the input feature width).
    """

    m: int = 8
    k: int = 256
    alpha: float = 10.0
    tau: float = 0.2
    eta: int = 10
    beta: float = 1e-4
    gamma: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 50
    lr_head: float = 1e-4
    lr_codebooks: float = 1e-3
    seed: int = 0
    dim: "int | None" = None
    use_bias: bool = False

    def validate(self) -> None:
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if not is_power_of_two(self.k):
            raise ValueError(f"k must be a power of two, got {self.k}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        n_scores = 2 * (self.batch_size - 1)
        if self.eta > n_scores - 1:
            raise ValueError(
                f"eta={self.eta} leaves no negatives: batch_size {self.batch_size} "
                f"gives {n_scores} negative scores per query, eta must be <= {n_scores - 1}"
            )
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.lr_head <= 0 or self.lr_codebooks <= 0:
            raise ValueError("learning rates must be > 0")
        if self.dim is not None and self.dim % self.m != 0:
            raise ValueError(f"dim={self.dim} is not divisible by m={self.m}")

    @property
    def bits(self) -> int:
        return self.m * (self.k.bit_length() - 1)

    @classmethod
    def from_bits(cls, bits: int, k: int = 256, **kw) -> "Hyperparams":
        """Derive m from a target code length in bits (bits = m * log2 k)."""
        if not is_power_of_two(k):
            raise ValueError(f"k must be a power of two, got {k}")
        log2k = k.bit_length() - 1
        if bits % log2k != 0:
            raise ValueError(f"bits={bits} is not a multiple of log2(k)={log2k}")
        hp = cls(m=bits // log2k, k=k, **kw)
        hp.validate()
        return hp

    def content_hash(self) -> bytes:
        """Stable 32-byte digest of every hyperparameter value."""
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).digest()


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}

# RunConfig fields that stay strings / paths rather than numbers.
_STR_KEYS = {"manifest", "out", "snapshot", "database"}


@dataclass
class RunConfig:
    """Hyperparams plus the paths a pipeline run needs.

    Built from an optional `key = value` config file, then overridden by
    command-line flags; validated before any work starts.
    """

    hyper: Hyperparams = field(default_factory=Hyperparams)
    manifest: "Path | None" = None
    out: Path = Path(".")
    snapshot: "Path | None" = None
    database: "Path | None" = None

    def validate(self) -> None:
        self.hyper.validate()

    def with_overrides(self, **kw) -> "RunConfig":
        """Apply non-None overrides; hyperparameter names hit `hyper`."""
        hyper_names = {f.name for f in fields(Hyperparams)}
        hp = self.hyper
        cfg_kw = {}
        for key, value in kw.items():
            if value is None:
                continue
            if key in hyper_names:
                hp = replace(hp, **{key: value})
            elif key == "bits":
                # bits = m * log2(k); k must already be settled (pass it first)
                log2k = hp.k.bit_length() - 1
                if int(value) % log2k != 0:
                    raise ValueError(f"bits={value} is not a multiple of log2(k)={log2k}")
                hp = replace(hp, m=int(value) // log2k)
            else:
                cfg_kw[key] = Path(value) if key in _STR_KEYS else value
        return replace(self, hyper=hp, **cfg_kw)


def parse_config_file(path: "str | Path") -> dict:
    """Parse a `key = value` config file; '#' starts a comment line."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        values[key] = _coerce(key, raw)
    return values


def _coerce(key: str, raw: str):
    if key in _STR_KEYS:
        return raw
    low = raw.lower()
    if low in _BOOL_WORDS:
        return _BOOL_WORDS[low]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def config_from_sources(config_file: "str | Path | None" = None, **overrides) -> RunConfig:
    """Assemble a RunConfig from defaults, an optional file, then overrides."""
    cfg = RunConfig()
    if config_file is not None:
        cfg = cfg.with_overrides(**parse_config_file(config_file))
    cfg = cfg.with_overrides(**overrides)
    cfg.validate()
    return cfg
