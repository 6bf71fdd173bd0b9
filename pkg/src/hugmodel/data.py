"""Datasets, normalisation to the unit window, synthetic mixtures, error tables."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-dimension affine window ``[lo, hi]`` mapped onto ``[0, 1]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DataError("lo and hi must be 1-D arrays of equal length")
        if not np.all(hi > lo):
            raise DataError("normalisation window must satisfy hi > lo in every dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationSpec":
        return cls(np.array(d["lo"], dtype=float), np.array(d["hi"], dtype=float))


@dataclass
class Dataset:
    """m samples of K hydrochemical parameters.

    ``samples`` holds raw values; ``normalized`` is filled in by
    :func:`normalize` and lives in the unit window.
    """

    names: list[str]
    samples: np.ndarray
    normalized: Optional[np.ndarray] = None
    spec: Optional[NormalizationSpec] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2:
            raise DataError("samples must be a 2-D array")
        if len(self.names) != self.samples.shape[1]:
            raise DataError(
                f"{len(self.names)} names for {self.samples.shape[1]} columns"
            )
        if not np.all(np.isfinite(self.samples)):
            raise DataError("samples contain missing or non-finite values")

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def K(self) -> int:
        return self.samples.shape[1]

    @property
    def n_planes(self) -> int:
        return self.K * (self.K - 1) // 2


@dataclass
class SyntheticSpec:
    true_sources: np.ndarray
    m: int
    seed: int = 0
    names: Optional[list[str]] = None

    def __post_init__(self):
        self.true_sources = np.asarray(self.true_sources, dtype=float)


def default_deltas(samples: np.ndarray) -> np.ndarray:
    return samples.max(axis=0) - samples.min(axis=0)


def normalize(raw: Dataset, delta: Optional[Sequence[Optional[float]]] = None):
    """Map each dimension's ``[min - delta, max + delta]`` onto ``[0, 1]``.

    ``delta`` defaults to the data range per dimension, which puts the data in
    ``[1/3, 2/3]``.  Individual entries may be ``None`` to keep the default.
    Returns the normalised dataset and its :class:`NormalizationSpec`.
    """
    x = raw.samples
    if raw.m < 3:
        raise DataError(f"need at least 3 samples, got {raw.m}")
    lo_d, hi_d = x.min(axis=0), x.max(axis=0)
    rng = hi_d - lo_d
    flat = [raw.names[k] for k in range(raw.K) if not rng[k] > 0]
    if flat:
        raise DataError(f"constant dimension(s) cannot be normalised: {', '.join(flat)}")
    d = rng.copy()
    if delta is not None:
        if len(delta) != raw.K:
            raise DataError(f"expected {raw.K} delta values, got {len(delta)}")
        for k, dk in enumerate(delta):
            if dk is not None:
                if not dk >= 0:
                    raise DataError(f"delta for {raw.names[k]} must be >= 0")
                d[k] = dk
    spec = NormalizationSpec(lo_d - d, hi_d + d)
    z = (x - spec.lo) / (spec.hi - spec.lo)
    return Dataset(list(raw.names), x.copy(), normalized=z, spec=spec), spec


def apply_normalization(points, spec: NormalizationSpec) -> np.ndarray:
    return (np.asarray(points, dtype=float) - spec.lo) / (spec.hi - spec.lo)


def denormalize(points, spec: NormalizationSpec) -> np.ndarray:
    return np.asarray(points, dtype=float) * (spec.hi - spec.lo) + spec.lo


def mix(sources: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Barycentres ``weights @ sources``; rows of ``weights`` sum to one."""
    return np.asarray(weights, dtype=float) @ np.asarray(sources, dtype=float)


def dirichlet_weights(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(n), size=m)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw ``m`` samples uniformly from the simplex spanned by the true sources."""
    s = spec.true_sources
    if s.ndim != 2 or s.shape[0] < 2:
        raise DataError("need at least 2 true sources")
    if len(np.unique(s, axis=0)) != len(s):
        raise DataError("true sources must be distinct")
    rng = np.random.default_rng(spec.seed)
    w = dirichlet_weights(s.shape[0], spec.m, rng)
    names = spec.names or [f"solute{k + 1}" for k in range(s.shape[1])]
    return Dataset(list(names), mix(s, w))


# --- source matching and error tables --------------------------------------

def match_sources(proposed, truth, method: str = "optimal") -> list[tuple[int, int]]:
    """Pair proposed sources with true ones by Euclidean distance.

    ``optimal`` minimises the total distance (Hungarian algorithm); ``greedy``
    repeatedly takes the closest remaining pair.  With unequal counts the
    surplus on either side stays unmatched.
    """
    p = np.asarray(proposed, dtype=float)
    t = np.asarray(truth, dtype=float)
    dist = np.linalg.norm(p[:, None, :] - t[None, :, :], axis=-1)
    if method == "optimal":
        rows, cols = linear_sum_assignment(dist)
        pairs = list(zip(rows.tolist(), cols.tolist()))
    elif method == "greedy":
        pairs = []
        used_p, used_t = set(), set()
        for flat in np.argsort(dist, axis=None, kind="stable"):
            i, j = divmod(int(flat), dist.shape[1])
            if i in used_p or j in used_t:
                continue
            pairs.append((i, j))
            used_p.add(i)
            used_t.add(j)
    else:
        raise ValueError(f"unknown matching method {method!r}")
    return sorted(pairs, key=lambda ij: ij[1])


@dataclass
class ErrorTable:
    """Relative differences in percent, one row per matched true source."""

    cells: np.ndarray  # (pairs, K), NaN where undefined
    pairs: list[tuple[int, int]]
    names: list[str]
    unmatched_proposed: list[int] = field(default_factory=list)
    unmatched_truth: list[int] = field(default_factory=list)

    @property
    def source_means(self) -> np.ndarray:
        return _nanmean(self.cells, axis=1)

    @property
    def dimension_means(self) -> np.ndarray:
        return _nanmean(self.cells, axis=0)

    @property
    def global_mean(self) -> float:
        ok = np.isfinite(self.cells)
        return float(self.cells[ok].mean()) if ok.any() else math.nan

    def rows(self) -> list[list]:
        out = [["source", *self.names, "mean_error_source"]]
        for (i, j), row, me in zip(self.pairs, self.cells, self.source_means):
            out.append([f"{j + 1}<-{i + 1}", *row.tolist(), float(me)])
        out.append(["mean_error_dimension", *self.dimension_means.tolist(), self.global_mean])
        return out


def _nanmean(a: np.ndarray, axis: int) -> np.ndarray:
    ok = np.isfinite(a)
    cnt = ok.sum(axis=axis)
    tot = np.where(ok, a, 0.0).sum(axis=axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)


def relative_error_table(proposed, truth, matching=None, names=None) -> ErrorTable:
    """Percent relative difference ``|s - s*| / |s*| * 100`` per coordinate.

    ``matching`` is a list of ``(proposed_index, truth_index)`` pairs; by
    default the optimal assignment from :func:`match_sources`.  Cells whose
    true coordinate is zero are undefined (NaN) and left out of every mean.
    """
    p = np.asarray(proposed, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape[1] != t.shape[1]:
        raise DataError("proposed and true sources differ in dimension")
    pairs = match_sources(p, t) if matching is None else [tuple(ij) for ij in matching]
    if len({i for i, _ in pairs}) != len(pairs) or len({j for _, j in pairs}) != len(pairs):
        raise DataError("matching must be one-to-one")
    cells = np.empty((len(pairs), t.shape[1]))
    for r, (i, j) in enumerate(pairs):
        with np.errstate(divide="ignore", invalid="ignore"):
            cells[r] = np.abs(p[i] - t[j]) / np.abs(t[j]) * 100.0
        zero = t[j] == 0
        if zero.any():
            log.warning("true source %d has zero coordinate(s); cells left undefined", j + 1)
            cells[r, zero] = np.nan
    names = names or [f"dim{k + 1}" for k in range(t.shape[1])]
    return ErrorTable(
        cells=cells,
        pairs=pairs,
        names=list(names),
        unmatched_proposed=sorted(set(range(len(p))) - {i for i, _ in pairs}),
        unmatched_truth=sorted(set(range(len(t))) - {j for _, j in pairs}),
    )


# --- CSV ---------------------------------------------------------------------

def load_csv(path) -> Dataset:
    """Read a header row of parameter names followed by numeric rows."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise DataError(f"{path} is not UTF-8: {e}") from e
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path} is empty")
    names = [c.strip() for c in rows[0]]
    if len(names) < 2:
        raise DataError(f"{path}: need at least 2 columns, got {len(names)}")
    values = []
    bad = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(names):
            bad.append(f"row {lineno}: expected {len(names)} cells, got {len(r)}")
            continue
        try:
            vals = [float(c) for c in r]
        except ValueError:
            bad.append(f"row {lineno}: blank or non-numeric cell")
            continue
        if not all(math.isfinite(v) for v in vals):
            bad.append(f"row {lineno}: non-finite value")
            continue
        values.append(vals)
    if bad:
        raise DataError(f"{path}: " + "; ".join(bad))
    if len(values) < 3:
        raise DataError(f"{path}: need at least 3 data rows, got {len(values)}")
    return Dataset(names, np.array(values, dtype=float))


def write_csv(path, names: Sequence[str], rows) -> None:
    """Write rows with ``repr`` floats so a read-back is bit exact."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(names))
        for r in np.asarray(rows, dtype=float):
            w.writerow([repr(float(v)) for v in r])


def save_dataset(ds: Dataset, path) -> None:
    write_csv(path, ds.names, ds.samples)
