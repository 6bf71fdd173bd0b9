"""Hug model energies and sufficient statistics on coordinate planes.

Sources and samples live in the normalised window ``W = [0, 1]^K``.  The
energy of a source configuration is evaluated on one coordinate plane at a
time; planes are numbered ``1..L`` in lexicographic order of their dimension
pairs, ``L = K(K-1)/2``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, astuple

import numpy as np

from .errors import DomainError
from .geometry import count_inside, hull_area, monotone_chain_hull


@dataclass(frozen=True)
class ModelParams:
    theta1: float = 11.25
    theta2: float = 250.0
    theta3: float = 0.25
    theta4: float = 1.0
    r: float = 0.01

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3, self.theta4])

    def with_theta(self, theta) -> "ModelParams":
        t1, t2, t3, t4 = (float(x) for x in theta)
        return ModelParams(t1, t2, t3, t4, self.r)


@dataclass(frozen=True)
class ThetaPrior:
    """Independent Gaussians on the four energy weights."""

    means: tuple = (11.25, 250.0, 0.25, 1.0)
    variances: tuple = (1.0, 10.0, 0.01, 0.01)

    def __post_init__(self):
        if len(self.means) != 4 or len(self.variances) != 4:
            raise ValueError("theta prior needs 4 means and 4 variances")
        if not all(v > 0 for v in self.variances):
            raise ValueError("prior variances must be positive")


@dataclass(frozen=True)
class HugStatistics:
    g: float
    n_e: float
    n: int
    n_r: int

    def as_tuple(self) -> tuple:
        return astuple(self)


def plane_pairs(K: int) -> list[tuple[int, int]]:
    """Dimension pairs of planes ``1..L`` (0-based dimension indices)."""
    return list(itertools.combinations(range(K), 2))


def plane_pair(v: int, K: int) -> tuple[int, int]:
    pairs = plane_pairs(K)
    if not 1 <= v <= len(pairs):
        raise ValueError(f"plane index {v} outside [1, {len(pairs)}]")
    return pairs[v - 1]


class HugData:
    """Normalised samples plus the per-plane data hull areas.

    The data never change during a run, so hull areas are computed once.
    A plane whose projected data hull has zero area is flagged; evaluating
    the model on it raises :class:`DomainError`.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] < 2:
            raise ValueError("data must be an (m, K) array with K >= 2")
        if len(pts) < 3:
            raise ValueError("need at least 3 samples")
        self.points = pts
        self.pairs = plane_pairs(pts.shape[1])
        self.areas = np.array(
            [hull_area(monotone_chain_hull(pts[:, [i, j]])) for i, j in self.pairs]
        )

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def K(self) -> int:
        return self.points.shape[1]

    @property
    def L(self) -> int:
        return len(self.pairs)

    def valid_planes(self) -> list[int]:
        return [v for v in range(1, self.L + 1) if self.areas[v - 1] > 0]

    def area(self, v: int) -> float:
        a = self.areas[v - 1]
        if not a > 0:
            i, j = self.pairs[v - 1]
            raise DomainError(
                f"data hull on plane {v} (dims {i + 1},{j + 1}) has zero area; "
                "drop one of these dimensions"
            )
        return float(a)

    def project(self, v: int) -> np.ndarray:
        i, j = self.pairs[v - 1]
        return self.points[:, [i, j]]


def as_hug_data(d) -> HugData:
    if isinstance(d, HugData):
        return d
    pts = getattr(d, "normalized", None)
    if pts is None:
        pts = getattr(d, "samples", d)
    return HugData(pts)


def close_pairs(points2d: np.ndarray, r: float) -> int:
    """Number of pairs at planar distance <= r (closed balls)."""
    p = np.asarray(points2d, dtype=float)
    cnt = 0
    r2 = r * r
    for a in range(len(p)):
        for b in range(a + 1, len(p)):
            dx = p[a, 0] - p[b, 0]
            dy = p[a, 1] - p[b, 1]
            if dx * dx + dy * dy <= r2:
                cnt += 1
    return cnt


def compute_statistics(s, d, v: int, params: ModelParams) -> HugStatistics:
    """Sufficient statistics (g, n_e, n, n_r) of sources ``s`` on plane ``v``."""
    hd = as_hug_data(d)
    data_area = hd.area(v)
    i, j = hd.pairs[v - 1]
    src = np.asarray(s, dtype=float).reshape(-1, hd.K)
    n = len(src)
    proj = src[:, [i, j]]
    if n == 0:
        return HugStatistics(1.0, 1.0, 0, 0)
    hull = monotone_chain_hull(proj)
    g = float(abs(hull_area(hull) / data_area - 1.0))
    n_e = 1.0 - count_inside(hull, hd.project(v)) / hd.m
    return HugStatistics(g, n_e, n, close_pairs(proj, params.r))


def data_energy(stats: HugStatistics, params: ModelParams) -> float:
    return params.theta1 * stats.g + params.theta2 * stats.n_e


def interaction_energy(stats: HugStatistics, params: ModelParams) -> float:
    return params.theta3 * stats.n + params.theta4 * stats.n_r


def total_energy(s, d, v: int, params: ModelParams) -> float:
    st = compute_statistics(s, d, v, params)
    return data_energy(st, params) + interaction_energy(st, params)


def log_density_ratio(s_new, s_old, d, v: int, params: ModelParams) -> float:
    """log p(s_new | theta, v) - log p(s_old | theta, v); Z(theta) cancels."""
    hd = as_hug_data(d)
    return total_energy(s_old, hd, v, params) - total_energy(s_new, hd, v, params)


def theta_prior_logpdf(theta, prior: ThetaPrior) -> float:
    t = theta.theta if isinstance(theta, ModelParams) else np.asarray(theta, dtype=float)
    mu = np.asarray(prior.means, dtype=float)
    var = np.asarray(prior.variances, dtype=float)
    return float(np.sum(-0.5 * np.log(2 * math.pi * var) - 0.5 * (t - mu) ** 2 / var))


def sample_theta_tempered(
    prior: ThetaPrior, T: float, rng: np.random.Generator, r: float = 0.01
) -> ModelParams:
    """Draw from the prior raised to ``1/T``.

    A Gaussian to the power ``1/T`` is again Gaussian with variance scaled by
    ``T``.  Non-positive coordinates are redrawn so the weights stay positive.
    """
    if not T > 0:
        raise ValueError("temperature must be positive")
    mu = np.asarray(prior.means, dtype=float)
    sd = np.sqrt(np.asarray(prior.variances, dtype=float) * T)
    theta = mu + sd * rng.standard_normal(4)
    bad = theta <= 0
    while bad.any():
        theta[bad] = mu[bad] + sd[bad] * rng.standard_normal(int(bad.sum()))
        bad = theta <= 0
    return ModelParams(*theta.tolist(), r=r)
