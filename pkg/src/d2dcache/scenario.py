"""Synthetic scenario generation (Zipf requests, Gamma contact rates).

Random draws come from independent substreams, one per field family, all
derived from the config seed: ``rates`` for contact rates and ``segments``
for recovery thresholds. Adding a new family never perturbs existing draws.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .model import Scenario

__all__ = ["GeneratorConfig", "zipf_popularity", "generate", "load_config", "STREAMS"]

STREAMS = {"rates": 0, "segments": 1}


@dataclass(frozen=True)
class GeneratorConfig:
    num_users: int = 20
    num_files: int = 150
    cache_capacity: int = 3
    contact_budget: int = 2
    zipf_shape: float = 0.8
    gamma_shape: float = 4.43
    gamma_scale: float = 1.0 / 1088.0
    recover_range: Tuple[int, int] = (1, 3)
    max_multiplier: int = 3
    nlr_limit: float = 0.7
    delay_limit: float = 400.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "recover_range", tuple(int(v) for v in self.recover_range))
        if self.num_users < 1 or self.num_files < 1:
            raise ValueError("num_users and num_files must be positive")
        if self.cache_capacity < 0:
            raise ValueError("cache_capacity must be nonnegative")
        if self.contact_budget < 1 or self.max_multiplier < 1:
            raise ValueError("contact_budget and max_multiplier must be positive")
        if self.gamma_shape <= 0 or self.gamma_scale <= 0:
            raise ValueError("Gamma parameters must be positive")
        if self.zipf_shape < 0:
            raise ValueError("zipf_shape must be nonnegative")
        lo, hi = self.recover_range
        if not 1 <= lo <= hi:
            raise ValueError("recover_range must satisfy 1 <= low <= high")

    def replace(self, **changes) -> "GeneratorConfig":
        kw = asdict(self)
        kw.update(changes)
        return GeneratorConfig(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recover_range"] = list(self.recover_range)
        return d


def load_config(path: Union[str, Path]) -> GeneratorConfig:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    names = {f.name for f in fields(GeneratorConfig)}
    unknown = set(doc) - names
    if unknown:
        raise ValueError(f"unknown config field(s): {sorted(unknown)}")
    return GeneratorConfig(**doc)


def zipf_popularity(gamma: float, num_files: int) -> np.ndarray:
    """Request probabilities ``f**-gamma / sum_k k**-gamma`` for ``f = 1..num_files``."""
    if num_files < 1:
        raise ValueError("num_files must be positive")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    w = np.arange(1, num_files + 1, dtype=float) ** (-float(gamma))
    return w / w.sum()


def _stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), STREAMS[name]])


def generate(config: GeneratorConfig) -> Scenario:
    """Draw a scenario; identical configs give identical scenarios."""
    U, F = config.num_users, config.num_files
    pop = np.repeat(zipf_popularity(config.zipf_shape, F)[:, None], U, axis=1)

    rates = _stream(config.seed, "rates")
    iu, ju = np.triu_indices(U, k=1)
    lam = np.zeros((U, U))
    draws = rates.gamma(config.gamma_shape, config.gamma_scale, size=iu.size)
    lam[iu, ju] = draws
    lam[ju, iu] = draws

    segs = _stream(config.seed, "segments")
    lo, hi = config.recover_range
    rec = segs.integers(lo, hi, endpoint=True, size=F)

    return Scenario(
        num_users=U,
        num_files=F,
        cache_capacity=np.full(U, config.cache_capacity),
        contact_budget=config.contact_budget,
        contact_rate=lam,
        popularity=pop,
        recover_segments=rec,
        max_segments=config.max_multiplier * rec,
        nlr_limit=config.nlr_limit,
        delay_limit=config.delay_limit,
        zipf_shape=np.full(U, config.zipf_shape),
    )
