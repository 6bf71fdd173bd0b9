"""Run configuration: presets, TOML files and flag overrides."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .model import ThetaPrior
from .sampler import AnnealingSchedule, SamplerConfig

PRESETS = {
    # full-length schedule; hours of runtime
    "paper": dict(T1=1e4, c=0.99999, T_min=1e-6, N=3_500_000, save_every=1000, keep_last=500),
    # same, starting twice as hot
    "paper-hot": dict(T1=2e4, c=0.99999, T_min=1e-6, N=3_500_000, save_every=1000,
                      keep_last=500),
    # ten times shorter; T still sweeps down to T_min and the last 500 records
    # all come from the constant-temperature tail
    "desk": dict(T1=1e4, c=0.9999, T_min=1e-6, N=350_000, save_every=200, keep_last=500),
}


@dataclass
class ClusterConfig:
    k_per_plane: Optional[dict] = None
    k_global: Optional[int] = None
    seed: int = 0
    order: str = "random"
    k_range: Optional[list] = None
    top: Optional[int] = None


@dataclass
class RunConfig:
    preset: str = "desk"
    seed: int = 0
    data_path: Optional[str] = None
    delta: Optional[list] = None
    synthetic: Optional[dict] = None
    r: float = 0.01
    prior: ThetaPrior = field(default_factory=ThetaPrior)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    schedule: AnnealingSchedule = field(default_factory=lambda: AnnealingSchedule(**PRESETS["desk"]))
    cell_length: float = 0.02
    chains: int = 1
    cluster: ClusterConfig = field(default_factory=ClusterConfig)

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "seed": self.seed,
            "data": {"path": self.data_path, "delta": self.delta},
            "synthetic": self.synthetic,
            "model": {"r": self.r},
            "prior": {"means": list(self.prior.means), "variances": list(self.prior.variances)},
            "sampler": dataclasses.asdict(self.sampler),
            "schedule": dataclasses.asdict(self.schedule),
            "grid": {"cell_length": self.cell_length},
            "chains": self.chains,
            "cluster": dataclasses.asdict(self.cluster),
        }


SAMPLER_KEYS = {f.name for f in dataclasses.fields(SamplerConfig)}
SCHEDULE_KEYS = {f.name for f in dataclasses.fields(AnnealingSchedule)}


def _build(cls, values: dict, what: str):
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {what}: {e}") from e


def load_config(path=None, preset: Optional[str] = None, overrides: Optional[dict] = None
                ) -> RunConfig:
    """Merge preset < TOML file < explicit overrides into a :class:`RunConfig`.

    ``overrides`` uses flat keys: any sampler or schedule field, ``r``,
    ``seed``, ``delta``, ``cell_length``, ``chains``, ``data_path``.
    A ``.json`` path is read as the ``config.json`` echoed into run directories.
    """
    raw: dict = {}
    if path is not None:
        try:
            with Path(path).open("rb") as fh:
                raw = json.load(fh) if Path(path).suffix == ".json" else tomllib.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except (tomllib.TOMLDecodeError, ValueError) as e:
            raise ConfigError(f"{path}: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a table at the top level")
        # echoed configs spell out unset values as null
        raw = {k: ({kk: vv for kk, vv in v.items() if vv is not None}
                   if isinstance(v, dict) else v)
               for k, v in raw.items() if v is not None}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    name = overrides.pop("preset", None) or preset or raw.get("preset", "desk")
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")

    sched = dict(PRESETS[name])
    sched.update(raw.get("schedule", {}))
    samp = dict(raw.get("sampler", {}))
    for k in list(overrides):
        if k in SCHEDULE_KEYS:
            sched[k] = overrides.pop(k)
        elif k in SAMPLER_KEYS:
            samp[k] = overrides.pop(k)
    unknown = (set(sched) - SCHEDULE_KEYS) | (set(samp) - SAMPLER_KEYS)
    if unknown:
        raise ConfigError(f"unknown schedule/sampler keys: {sorted(unknown)}")

    prior_raw = raw.get("prior", {})
    prior = _build(
        ThetaPrior,
        {k: tuple(v) for k, v in prior_raw.items() if k in ("means", "variances")},
        "prior",
    )
    data = raw.get("data", {})
    cl = raw.get("cluster", {})
    kpp = cl.get("k_per_plane")
    if isinstance(kpp, list):
        kpp = {i + 1: int(k) for i, k in enumerate(kpp)}
    elif isinstance(kpp, dict):
        kpp = {int(k): int(v) for k, v in kpp.items()}
    cluster = _build(ClusterConfig, {**cl, "k_per_plane": kpp}, "cluster section")

    cfg = RunConfig(
        preset=name,
        seed=int(overrides.pop("seed", raw.get("seed", 0))),
        data_path=overrides.pop("data_path", data.get("path")),
        delta=overrides.pop("delta", data.get("delta")),
        synthetic=raw.get("synthetic"),
        r=float(overrides.pop("r", raw.get("model", {}).get("r", 0.01))),
        prior=prior,
        sampler=_build(SamplerConfig, samp, "sampler section"),
        schedule=_build(AnnealingSchedule, sched, "schedule section"),
        cell_length=float(overrides.pop("cell_length", raw.get("grid", {}).get("cell_length", 0.02))),
        chains=int(overrides.pop("chains", raw.get("chains", 1))),
        cluster=cluster,
    )
    if overrides:
        raise ConfigError(f"unknown settings: {sorted(overrides)}")
    if not cfg.r > 0:
        raise ConfigError("interaction radius r must be positive")
    if cfg.chains < 1:
        raise ConfigError("chains must be >= 1")
    return cfg
