"""Birth/death/change Metropolis-Hastings, Gibbs sweeps over planes, annealing.

The annealing driver runs in jitted blocks (:mod:`hugmodel._kernels`).  Each
outer iteration draws its random numbers from four independent streams in a
fixed order, so running one iteration at a time with :func:`gibbs_sweep` or a
whole block at once gives the same chain.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import DomainError
from .model import (
    HugData,
    HugStatistics,
    ModelParams,
    ThetaPrior,
    as_hug_data,
    compute_statistics,
    interaction_energy,
    sample_theta_tempered,
    total_energy,
)

log = logging.getLogger(__name__)

N_INITIAL_SOURCES = 4


CHANGE_SPACES = {"plane": 0, "full": 1}


@dataclass(frozen=True)
class SamplerConfig:
    p_b: float = 0.2
    p_d: float = 0.2
    p_c: float = 0.6
    r_c: float = 0.3
    M: int = 200
    # deaths below this count are rejected; 0 disables the rule
    min_sources: int = 3
    capacity: int = 512
    # "plane": the change ball lives in the two coordinates of the active
    # plane; "full": a K-dimensional ball that also moves unseen coordinates
    change_space: str = "plane"

    def __post_init__(self):
        ps = (self.p_b, self.p_d, self.p_c)
        if not all(0.0 <= p <= 1.0 for p in ps) or sum(ps) > 1.0 + 1e-12:
            raise ValueError("move probabilities must lie in [0, 1] and sum to <= 1")
        if self.p_b > 0 and self.p_d == 0 or self.p_d > 0 and self.p_b == 0:
            raise ValueError("birth and death must both be enabled or both disabled")
        if not self.r_c > 0:
            raise ValueError("r_c must be positive")
        if self.M < 0 or self.min_sources < 0 or self.capacity < 1:
            raise ValueError("M, min_sources and capacity must be non-negative")
        if self.change_space not in CHANGE_SPACES:
            raise ValueError(f"change_space must be one of {sorted(CHANGE_SPACES)}")


@dataclass(frozen=True)
class AnnealingSchedule:
    T1: float = 1e4
    c: float = 0.99999
    T_min: float = 1e-6
    N: int = 3_500_000
    G: Optional[int] = None  # None: one Gibbs call per usable plane
    save_every: int = 1000
    keep_last: int = 500

    def __post_init__(self):
        if not (0.0 < self.c < 1.0):
            raise ValueError("cooling coefficient must lie in (0, 1)")
        if not (self.T1 > 0 and self.T_min > 0):
            raise ValueError("temperatures must be positive")
        if self.N < 0 or self.save_every < 1 or self.keep_last < 1:
            raise ValueError("N >= 0, save_every >= 1 and keep_last >= 1 required")
        if self.G is not None and self.G < 0:
            raise ValueError("G must be non-negative")

    def temperature(self, k) -> np.ndarray:
        """Temperature of iteration ``k`` (1-based): ``T1 c^(k-1)`` floored at ``T_min``."""
        k = np.asarray(k, dtype=float)
        return np.maximum(self.T1 * self.c ** (k - 1.0), self.T_min)

    def iterations_to_floor(self) -> int:
        """First iteration that runs at ``T_min``."""
        if self.T1 <= self.T_min:
            return 1
        return int(math.ceil(math.log(self.T_min / self.T1) / math.log(self.c))) + 1


class ChainRNG:
    """Independent generators for each kind of draw, spawned from one seed."""

    def __init__(self, seed: int):
        init, theta, plane, unif, norm = np.random.SeedSequence(seed).spawn(5)
        self.seed = seed
        self.init = np.random.default_rng(init)
        self.theta = np.random.default_rng(theta)
        self.plane = np.random.default_rng(plane)
        self.uniform = np.random.default_rng(unif)
        self.normal = np.random.default_rng(norm)


@dataclass
class ChainState:
    sources: np.ndarray
    theta: ModelParams
    plane: Optional[int] = None
    iteration: int = 0
    temperature: float = float("nan")
    accepted: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.sources)


# --- single MH step (reference implementation) -------------------------------

def n_uniforms(K: int) -> int:
    return _kernels.N_UNIFORM_FIXED + K


def mh_step_from_draws(s, d, v: int, params: ModelParams, T: float,
                       cfg: SamplerConfig, u, z) -> np.ndarray:
    """One MH update of ``s`` on plane ``v`` targeting ``p(s | theta, v)^(1/T)``.

    ``u`` and ``z`` are the uniforms and normals consumed by the step, laid out
    as in :mod:`hugmodel._kernels`.  Births are uniform in ``W``; a change
    moves one source uniformly within a ball of radius ``r_c``, either in
    the two coordinates of plane ``v`` or in all K (``cfg.change_space``).  Only the
    density ratio is tempered; the proposal ratio is not.  Proposals leaving
    ``W`` are rejected.
    """
    hd = as_hug_data(d)
    s = np.array(s, dtype=float).reshape(-1, hd.K)
    n, K = s.shape
    vol = 1.0
    U_old = total_energy(s, hd, v, params)
    um = u[0]
    if um < cfg.p_b:
        if n >= cfg.capacity:
            return s
        eta = np.asarray(u[_kernels.N_UNIFORM_FIXED:_kernels.N_UNIFORM_FIXED + K], dtype=float)
        new = np.vstack([s, eta])
        st_old = compute_statistics(s, hd, v, params) if n else None
        st_new = compute_statistics(new, hd, v, params)
        if __debug__ and st_old is not None:
            # local stability of the interaction part
            d_int = interaction_energy(st_new, params) - interaction_energy(st_old, params)
            assert math.exp(-d_int) <= math.exp(-params.theta3) * (1 + 1e-12)
        log_r = -(total_energy(new, hd, v, params) - U_old) / T + math.log(
            cfg.p_d * vol / (cfg.p_b * (n + 1))
        )
    elif um < cfg.p_b + cfg.p_d:
        if n == 0 or n <= cfg.min_sources:
            return s
        idx = int(u[1] * n)
        new = s.copy()
        new[[idx, n - 1]] = new[[n - 1, idx]]
        new = new[:-1]
        log_r = -(total_energy(new, hd, v, params) - U_old) / T + math.log(
            cfg.p_b * n / (cfg.p_d * vol)
        )
    elif um < cfg.p_b + cfg.p_d + cfg.p_c:
        if n == 0:
            return s
        idx = int(u[1] * n)
        z = np.asarray(z, dtype=float)
        # summed in the kernel's order so both paths round identically
        zz = z if cfg.change_space == "full" else z[:2]
        nz = 0.0
        for zk in zz:
            nz += float(zk) * float(zk)
        nz = math.sqrt(nz)
        if nz == 0.0:
            return s
        cand = s[idx].copy()
        if cfg.change_space == "full":
            cand += cfg.r_c * u[3] ** (1.0 / K) * np.asarray(z) / nz
        else:
            i1, i2 = hd.pairs[v - 1]
            cand[[i1, i2]] += cfg.r_c * math.sqrt(u[3]) * np.asarray(z[:2]) / nz
        if np.any(cand < 0.0) or np.any(cand > 1.0):
            return s
        new = s.copy()
        new[idx] = cand
        log_r = -(total_energy(new, hd, v, params) - U_old) / T
    else:
        return s
    if log_r >= 0.0 or u[2] < math.exp(log_r):
        return new
    return s


def mh_step(s, d, v: int, params: ModelParams, T: float, cfg: SamplerConfig,
            rng: np.random.Generator) -> np.ndarray:
    """:func:`mh_step_from_draws` with fresh draws from ``rng``."""
    K = as_hug_data(d).K
    u = rng.random(n_uniforms(K))
    z = rng.standard_normal(K)
    return mh_step_from_draws(s, d, v, params, T, cfg, u, z)


def acceptance_probability_birth(delta_U: float, n: int, T: float, cfg: SamplerConfig,
                                 volume: float = 1.0) -> float:
    r = math.exp(-delta_U / T) * cfg.p_d * volume / (cfg.p_b * (n + 1))
    return min(1.0, r)


def acceptance_probability_death(delta_U: float, n: int, T: float, cfg: SamplerConfig,
                                 volume: float = 1.0) -> float:
    """Death from a configuration of ``n`` points; ``delta_U = U(s \\ eta) - U(s)``."""
    if n <= cfg.min_sources:
        return 0.0
    r = math.exp(-delta_U / T) * cfg.p_b * n / (cfg.p_d * volume)
    return min(1.0, r)


# --- jitted driver -------------------------------------------------------------

class _Engine:
    """Arrays the kernel needs, built once per dataset."""

    def __init__(self, hd: HugData, cfg: SamplerConfig):
        self.hd = hd
        self.cfg = cfg
        self.valid = np.array(hd.valid_planes(), dtype=np.int64) - 1
        if len(self.valid) == 0:
            raise DomainError("every plane has a degenerate data hull")
        if len(self.valid) < hd.L:
            dropped = sorted(set(range(1, hd.L + 1)) - set((self.valid + 1).tolist()))
            log.warning("planes %s have zero-area data hulls and are skipped", dropped)
        self.pairs = np.array(hd.pairs, dtype=np.int64)
        self.dplanes = np.ascontiguousarray(
            np.stack([hd.points[:, [i, j]].T for i, j in hd.pairs])
        )
        self.areas = hd.areas.astype(float)
        self.work, self.iwork = _kernels.make_workspace(cfg.capacity, hd.m)
        self.S = np.zeros((cfg.capacity, hd.K))

    def load(self, sources: np.ndarray) -> int:
        n = len(sources)
        if n > self.cfg.capacity:
            raise ValueError("more sources than the buffer capacity")
        self.S[:n] = sources
        return n

    def run(self, n, planes, thetas, temps, urand, zrand, r, counts) -> int:
        c = self.cfg
        return _kernels.run_iterations(
            self.S, n, planes, thetas, temps, urand, zrand, self.pairs, self.dplanes,
            self.areas, r, c.p_b, c.p_d, c.p_c, c.r_c, c.min_sources,
            CHANGE_SPACES[c.change_space], counts,
            self.work, self.iwork,
        )


def _draw_iteration(rng: ChainRNG, prior: ThetaPrior, T: float, valid: np.ndarray,
                    G: int, r: float, urand: np.ndarray, zrand: np.ndarray):
    """Draws for one outer iteration, in a fixed order; fills urand/zrand in place."""
    theta = sample_theta_tempered(prior, T, rng.theta, r)
    # p(v) is uniform, and so is p(v)^(1/T)
    planes = valid[rng.plane.integers(len(valid), size=G)]
    rng.uniform.random(out=urand)
    rng.normal.standard_normal(out=zrand)
    return theta, planes


def gibbs_sweep(state: ChainState, d, prior: ThetaPrior, T: float, cfg: SamplerConfig,
                schedule: AnnealingSchedule, rng: ChainRNG, r: float = 0.01,
                _engine: Optional[_Engine] = None) -> ChainState:
    """One annealing iteration: draw theta, then G times draw a plane and run M MH steps."""
    hd = as_hug_data(d)
    eng = _engine or _Engine(hd, cfg)
    G = len(eng.valid) if schedule.G is None else schedule.G
    K = hd.K
    urand = np.empty((G, cfg.M, n_uniforms(K)))
    zrand = np.empty((G, cfg.M, K))
    theta, planes = _draw_iteration(rng, prior, T, eng.valid, G, r, urand, zrand)
    n = eng.load(state.sources)
    counts = state.accepted.copy()
    n = eng.run(n, planes[None, :], theta.theta[None, :], np.array([T]),
                urand[None], zrand[None], r, counts)
    return ChainState(
        sources=eng.S[:n].copy(),
        theta=theta,
        plane=int(planes[-1]) + 1 if G else state.plane,
        iteration=state.iteration + 1,
        temperature=T,
        accepted=counts,
    )


# --- traces ------------------------------------------------------------------------

@dataclass
class TraceRecord:
    iteration: int
    temperature: float
    theta: list
    plane: Optional[int]
    sources: np.ndarray
    stats: list  # HugStatistics per plane, None for skipped planes

    def to_json(self) -> dict:
        return {
            "iter": self.iteration,
            "temperature": self.temperature,
            "theta": list(self.theta),
            "plane": self.plane,
            "sources": self.sources.tolist(),
            "stats_per_plane": [None if s is None else asdict(s) for s in self.stats],
        }

    @classmethod
    def from_json(cls, d: dict, K: int) -> "TraceRecord":
        return cls(
            iteration=int(d["iter"]),
            temperature=float(d["temperature"]),
            theta=[float(t) for t in d["theta"]],
            plane=d["plane"],
            sources=np.array(d["sources"], dtype=float).reshape(-1, K),
            stats=[None if s is None else HugStatistics(**s) for s in d["stats_per_plane"]],
        )


@dataclass
class ChainTrace:
    header: dict
    records: list

    @property
    def K(self) -> int:
        return int(self.header["K"])

    def last(self, keep: Optional[int] = None) -> list:
        keep = keep or int(self.header.get("schedule", {}).get("keep_last", len(self.records)))
        return self.records[-keep:]

    def pooled_sources(self, keep: Optional[int] = None) -> np.ndarray:
        recs = self.last(keep)
        rows = [r.sources for r in recs if len(r.sources)]
        return np.vstack(rows) if rows else np.empty((0, self.K))

    def write_jsonl(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"header": self.header}) + "\n")
            for rec in self.records:
                fh.write(json.dumps(rec.to_json()) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "ChainTrace":
        with Path(path).open(encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip()]
        if not lines:
            raise ValueError(f"{path} is empty")
        header = json.loads(lines[0])["header"]
        K = int(header["K"])
        return cls(header, [TraceRecord.from_json(json.loads(ln), K) for ln in lines[1:]])


def _record(state: ChainState, hd: HugData, r: float) -> TraceRecord:
    params = ModelParams(*state.theta.theta.tolist(), r=r)
    valid = set(hd.valid_planes())
    stats = [
        compute_statistics(state.sources, hd, v, params) if v in valid else None
        for v in range(1, hd.L + 1)
    ]
    return TraceRecord(
        iteration=state.iteration,
        temperature=float(state.temperature),
        theta=state.theta.theta.tolist(),
        plane=state.plane,
        sources=state.sources.copy(),
        stats=stats,
    )


def simulated_annealing(d, prior: ThetaPrior, cfg: SamplerConfig,
                        schedule: AnnealingSchedule, seed: int, r: float = 0.01,
                        initial: Optional[np.ndarray] = None,
                        progress: Optional[Callable[[int, int, ChainState], None]] = None,
                        ) -> ChainTrace:
    """Anneal the Hug model on normalised data ``d``; deterministic given ``seed``.

    Starts from four uniform points in ``W`` unless ``initial`` is given.  The
    state is recorded at iteration 0 and every ``save_every`` iterations.
    """
    hd = as_hug_data(d)
    eng = _Engine(hd, cfg)
    rng = ChainRNG(seed)
    K = hd.K
    G = len(eng.valid) if schedule.G is None else schedule.G
    if initial is None:
        initial = rng.init.random((N_INITIAL_SOURCES, K))
    state = ChainState(
        sources=np.array(initial, dtype=float).reshape(-1, K),
        theta=ModelParams(*prior.means, r=r),
        temperature=float(schedule.T1),
    )
    header = {
        "seed": seed,
        "K": K,
        "m": hd.m,
        "r": r,
        "sampler": asdict(cfg),
        "schedule": {**asdict(schedule), "G": G},
        "prior": {"means": list(prior.means), "variances": list(prior.variances)},
        "planes": [list(p) for p in hd.pairs],
    }
    records = [_record(state, hd, r)]
    if schedule.N == 0:
        return ChainTrace(header, records)

    n = eng.load(state.sources)
    counts = np.zeros(3, dtype=np.int64)
    nu = n_uniforms(K)
    M = cfg.M
    chunk = max(1, min(schedule.save_every, 200_000 // max(1, G * M)))
    urand = np.empty((chunk, G, M, nu))
    zrand = np.empty((chunk, G, M, K))
    planes = np.empty((chunk, G), dtype=np.int64)
    thetas = np.empty((chunk, 4))
    theta = state.theta
    k = 0
    while k < schedule.N:
        B = min(chunk, schedule.N - k, schedule.save_every - k % schedule.save_every)
        temps = schedule.temperature(np.arange(k + 1, k + B + 1))
        for b in range(B):
            theta, planes[b] = _draw_iteration(rng, prior, float(temps[b]), eng.valid, G, r,
                                               urand[b], zrand[b])
            thetas[b] = theta.theta
        n = eng.run(n, planes[:B], thetas[:B], temps, urand[:B], zrand[:B], r, counts)
        k += B
        if k % schedule.save_every == 0 or k == schedule.N:
            state = ChainState(
                sources=eng.S[:n].copy(),
                theta=theta,
                plane=int(planes[B - 1, G - 1]) + 1 if G else None,
                iteration=k,
                temperature=float(temps[-1]),
                accepted=counts.copy(),
            )
            records.append(_record(state, hd, r))
            if progress is not None:
                progress(k, schedule.N, state)
    header["accepted"] = {"birth": int(counts[0]), "death": int(counts[1]),
                          "change": int(counts[2])}
    return ChainTrace(header, records)


def sample_fixed_theta(d, params: ModelParams, cfg: SamplerConfig, T: float, sweeps: int,
                       seed: int, initial: Optional[np.ndarray] = None,
                       G: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Run the MH-within-Gibbs chain at fixed ``theta`` and temperature.

    Each sweep draws ``G`` planes (default: one per usable plane) and runs
    ``cfg.M`` steps on each.  Returns the source count after every sweep and
    the final configuration.
    """
    hd = as_hug_data(d)
    eng = _Engine(hd, cfg)
    rng = ChainRNG(seed)
    K = hd.K
    G = len(eng.valid) if G is None else G
    if initial is None:
        initial = rng.init.random((N_INITIAL_SOURCES, K))
    n = eng.load(np.array(initial, dtype=float).reshape(-1, K))
    counts = np.zeros(3, dtype=np.int64)
    chunk = max(1, 200_000 // max(1, G * cfg.M))
    trace = np.empty(sweeps, dtype=np.int64)
    theta = params.theta
    k = 0
    while k < sweeps:
        B = min(chunk, sweeps - k)
        planes = eng.valid[rng.plane.integers(len(eng.valid), size=(B, G))]
        urand = rng.uniform.random((B, G, cfg.M, n_uniforms(K)))
        zrand = rng.normal.standard_normal((B, G, cfg.M, K))
        for b in range(B):
            n = eng.run(n, planes[b:b + 1], theta[None, :], np.array([T]), urand[b:b + 1],
                        zrand[b:b + 1], params.r, counts)
            trace[k + b] = n
        k += B
    return trace, eng.S[:n].copy()
