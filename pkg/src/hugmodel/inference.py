"""Post-processing of annealing traces.

Level sets of contact probabilities, running means of the statistics, k-means
with median points, the plane-by-plane sequential k-means and Ward
dendrograms used to choose the number of sources.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.cluster.hierarchy import linkage

from .errors import DomainError
from .model import plane_pairs
from .sampler import ChainTrace

DEDUP_TOL = 1e-9


def _configs(trace) -> list:
    if isinstance(trace, ChainTrace):
        return [r.sources for r in trace.last()]
    return [np.asarray(s, dtype=float) for s in trace]


def _records(trace) -> list:
    if isinstance(trace, ChainTrace):
        return trace.last()
    return list(trace)


# --- level sets ----------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    plane: int
    cell_length: float = 0.02

    @property
    def cells(self) -> int:
        c = round(1.0 / self.cell_length)
        if c < 1 or abs(c * self.cell_length - 1.0) > 1e-9:
            raise ValueError(f"cell length {self.cell_length} does not divide [0, 1]")
        return c


@dataclass
class LevelSetGrid:
    """Contact probabilities indexed ``[ix, iy]`` on one plane."""

    prob: np.ndarray
    n: int
    plane: int
    cell_length: float

    def rows(self) -> list[tuple[float, float, float]]:
        c = self.prob.shape[0]
        out = []
        for ix in range(c):
            for iy in range(c):
                out.append(((ix + 0.5) * self.cell_length, (iy + 0.5) * self.cell_length,
                            float(self.prob[ix, iy])))
        return out


def cell_index(values: np.ndarray, cells: int) -> np.ndarray:
    idx = np.floor(np.asarray(values, dtype=float) * cells).astype(np.int64)
    return np.clip(idx, 0, cells - 1)


def contact_probability_grid(trace, grid: GridSpec, K: Optional[int] = None) -> LevelSetGrid:
    """Fraction of configurations with at least one projected source in each cell.

    ``trace`` is a :class:`ChainTrace` (its last ``keep_last`` records are
    used) or a sequence of ``(n_i, K)`` source arrays.
    """
    configs = _configs(trace)
    if not configs:
        raise ValueError("empty trace")
    if K is None:
        K = trace.K if isinstance(trace, ChainTrace) else configs[0].shape[1]
    i, j = plane_pairs(K)[grid.plane - 1]
    c = grid.cells
    hits = np.zeros((c, c), dtype=np.int64)
    for s in configs:
        if len(s) == 0:
            continue
        s = s.reshape(-1, K)
        touched = np.zeros((c, c), dtype=bool)
        touched[cell_index(s[:, i], c), cell_index(s[:, j], c)] = True
        hits += touched
    return LevelSetGrid(hits / len(configs), len(configs), grid.plane, grid.cell_length)


def level_set(grid: LevelSetGrid, lam: float) -> set[tuple[int, int]]:
    """Cells whose contact probability is strictly above ``lam``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("level must lie in [0, 1]")
    return {(int(a), int(b)) for a, b in np.argwhere(grid.prob > lam)}


def count_regions(grid: LevelSetGrid, lam: float) -> int:
    """Connected groups (8-neighbourhood) of cells in the level set."""
    _, nlab = ndimage.label(grid.prob > lam, structure=np.ones((3, 3)))
    return int(nlab)


# --- running means -----------------------------------------------------------------

def cumulative_means(trace, plane: int) -> np.ndarray:
    """Running means of (g, n_e, n, n_r) on ``plane``; row t averages records 0..t."""
    recs = _records(trace)
    if not recs:
        raise ValueError("empty trace")
    vals = np.array([recs_stat.stats[plane - 1].as_tuple() for recs_stat in recs], dtype=float)
    return np.cumsum(vals, axis=0) / np.arange(1, len(vals) + 1)[:, None]


def suggested_cluster_count(trace) -> int:
    """Rounded mean source count over the kept records; a hint, never applied."""
    return int(round(float(np.mean([len(s) for s in _configs(trace)]))))


# --- k-means -----------------------------------------------------------------------

@dataclass
class ClusterResult:
    assignments: np.ndarray
    centers: np.ndarray
    medians: np.ndarray
    sds: np.ndarray
    sizes: np.ndarray
    inertia_history: list

    @property
    def k(self) -> int:
        return len(self.centers)

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(len(x))]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        tot = d2.sum()
        if tot > 0:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * tot, side="right"))
            idx = min(idx, len(x) - 1)
        else:
            idx = int(rng.integers(len(x)))
        centers[c] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[c]) ** 2, axis=1))
    return centers


def _assign(x, centers):
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    a = np.argmin(d2, axis=1)
    return a, float(d2[np.arange(len(x)), a].sum())


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300,
           n_init: int = 10) -> ClusterResult:
    """Lloyd's algorithm from k-means++ seeds, best of ``n_init`` restarts."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if k < 1:
        raise ValueError("k must be >= 1")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    if len(x) < k:
        raise DomainError(f"cannot form {k} clusters from {len(x)} points")
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        res = _lloyd(x, k, np.random.default_rng(child), max_iter)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def _lloyd(x, k, rng, max_iter) -> ClusterResult:
    centers = _kmeanspp(x, k, rng)
    assign, inertia = _assign(x, centers)
    history = [inertia]
    for _ in range(max_iter):
        for c in range(k):
            members = x[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:
                # empty cluster: move it to the worst-served point
                d2 = ((x - centers[assign]) ** 2).sum(axis=1)
                far = int(np.argmax(d2))
                centers[c] = x[far]
                assign[far] = c
        new, inertia = _assign(x, centers)
        history.append(inertia)
        if np.array_equal(new, assign):
            break
        assign = new
    for c in range(k):
        members = x[assign == c]
        if len(members):
            centers[c] = members.mean(axis=0)
    medians = np.array([np.median(x[assign == c], axis=0) if np.any(assign == c)
                        else centers[c] for c in range(k)])
    sds = np.array([x[assign == c].std(axis=0, ddof=1) if np.sum(assign == c) > 1
                    else np.zeros(x.shape[1]) for c in range(k)])
    sizes = np.bincount(assign, minlength=k)
    return ClusterResult(assign, centers, medians, sds, sizes, history)


def cluster_mass_check(points, k_candidates: Sequence[int], top: int,
                       seed: int = 0) -> dict[int, float]:
    """For each k, the share of points falling in the ``top`` largest clusters."""
    x = np.asarray(points, dtype=float)
    out = {}
    for k in k_candidates:
        res = kmeans(x, k, seed=seed)
        sizes = np.sort(res.sizes)[::-1]
        out[int(k)] = float(sizes[:top].sum() / len(x))
    return out


# --- sequential k-means ------------------------------------------------------------

@dataclass
class SequentialResult:
    collapsed: np.ndarray  # every input source after replacement
    distinct: np.ndarray
    multiplicity: np.ndarray
    order: list  # planes in the order visited

    @property
    def labels(self) -> np.ndarray:
        lab = np.empty(len(self.collapsed), dtype=np.int64)
        for q, d in enumerate(self.distinct):
            lab[np.all(np.abs(self.collapsed - d) <= DEDUP_TOL, axis=1)] = q
        return lab


def deduplicate(points, tol: float = DEDUP_TOL):
    """Group rows equal within ``tol`` in every coordinate; ordered by count."""
    x = np.asarray(points, dtype=float)
    reps: list[np.ndarray] = []
    counts: list[int] = []
    for row in x:
        for q, rep in enumerate(reps):
            if np.all(np.abs(rep - row) <= tol):
                counts[q] += 1
                break
        else:
            reps.append(row.copy())
            counts.append(1)
    order = np.argsort(-np.array(counts), kind="stable")
    return np.array(reps)[order].reshape(-1, x.shape[1]), np.array(counts)[order]


def sequential_kmeans(sources, k_per_plane: Mapping[int, int], seed: int = 0,
                      order: str = "random") -> SequentialResult:
    """Reconcile per-plane clusterings into K-dimensional sources.

    Planes are visited uniformly without replacement (``order="random"``) or
    as ``1..L`` (``order="fixed"``).  On each plane the projections are
    clustered into ``k_per_plane[v]`` groups and both coordinates of every
    source are overwritten by its cluster centre.
    """
    S = np.array(sources, dtype=float)
    if S.ndim != 2 or len(S) == 0:
        raise ValueError("need a non-empty (N, K) array of sources")
    pairs = plane_pairs(S.shape[1])
    missing = [v for v in range(1, len(pairs) + 1) if v not in k_per_plane]
    if missing:
        raise ValueError(f"no cluster count given for plane(s) {missing}")
    order_ss, km_ss = np.random.SeedSequence(seed).spawn(2)
    planes = list(range(1, len(pairs) + 1))
    if order == "random":
        planes = [int(v) for v in np.random.default_rng(order_ss).permutation(planes)]
    elif order != "fixed":
        raise ValueError(f"unknown plane order {order!r}")
    km_seeds = km_ss.generate_state(len(planes))
    for step, v in enumerate(planes):
        i, j = pairs[v - 1]
        proj = S[:, [i, j]]
        k = int(k_per_plane[v])
        n_distinct = len(np.unique(proj, axis=0))
        if k > n_distinct:
            raise DomainError(
                f"plane {v}: {k} clusters requested but only {n_distinct} distinct projections"
            )
        res = kmeans(proj, k, seed=int(km_seeds[step]))
        S[:, i] = res.centers[res.assignments, 0]
        S[:, j] = res.centers[res.assignments, 1]
    distinct, mult = deduplicate(S)
    return SequentialResult(S, distinct, mult, planes)


# --- Ward ----------------------------------------------------------------------------

@dataclass
class Dendrogram:
    """Ward merge tree in scipy linkage layout plus within-cluster SS increments."""

    linkage: np.ndarray
    increments: np.ndarray
    total_ss: float

    def within_ss(self, k: int) -> float:
        """Within-cluster sum of squares when the tree is cut into ``k`` clusters."""
        n = len(self.increments) + 1
        if not 1 <= k <= n:
            raise ValueError(f"k must lie in [1, {n}]")
        return float(self.increments[: n - k].sum())


def ward_dendrogram(points) -> Dendrogram:
    x = np.asarray(points, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least 2 points")
    Z = linkage(x, method="ward")
    # scipy's Ward height is sqrt(2 * increase in within-cluster SS)
    inc = Z[:, 2] ** 2 / 2.0
    return Dendrogram(Z, inc, float(((x - x.mean(axis=0)) ** 2).sum()))
