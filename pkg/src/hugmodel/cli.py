"""``hug`` command line: synth, detect, cluster, evaluate.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
domain error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import PRESETS, RunConfig, load_config
from .data import (
    Dataset,
    NormalizationSpec,
    SyntheticSpec,
    denormalize,
    generate_synthetic,
    load_csv,
    match_sources,
    normalize,
    relative_error_table,
    save_dataset,
    write_csv,
)
from .errors import ConfigError, DataError, DomainError
from .inference import (
    GridSpec,
    cluster_mass_check,
    contact_probability_grid,
    count_regions,
    cumulative_means,
    kmeans,
    sequential_kmeans,
    suggested_cluster_count,
    ward_dendrogram,
)
from .model import HugData
from .sampler import ChainTrace, simulated_annealing

log = logging.getLogger("hugmodel")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DOMAIN = 0, 2, 3, 4

# flag name -> type for the annealing and sampler overrides
OVERRIDE_FLAGS = {
    "r": float, "p_b": float, "p_d": float, "p_c": float, "r_c": float, "M": int,
    "T1": float, "c": float, "T_min": float, "N": int, "G": int,
    "save_every": int, "keep_last": int, "min_sources": int, "cell_length": float,
}


def _parse_delta(text: Optional[str]):
    if text is None:
        return None
    try:
        return [None if t.strip().lower() in ("", "auto") else float(t) for t in text.split(",")]
    except ValueError as e:
        raise ConfigError(f"--delta expects comma separated numbers: {e}") from e


def _parse_k_per_plane(text: Optional[str]):
    if text is None:
        return None
    try:
        if ":" in text:
            return {int(a): int(b) for a, b in (t.split(":") for t in text.split(","))}
        return {i + 1: int(t) for i, t in enumerate(text.split(","))}
    except ValueError as e:
        raise ConfigError(f"--k-per-plane expects '3,3,3' or '1:3,2:4': {e}") from e


def _config_from_args(args) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in OVERRIDE_FLAGS}
    overrides.update(
        seed=getattr(args, "seed", None),
        chains=getattr(args, "chains", None),
        delta=_parse_delta(getattr(args, "delta", None)),
        data_path=getattr(args, "data", None),
    )
    return load_config(args.config, preset=args.preset, overrides=overrides)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- synth -------------------------------------------------------------------------

def cmd_synth(cfg: RunConfig, out: Path) -> Path:
    """Mix the configured sources with Dirichlet weights; write samples and truth."""
    syn = cfg.synthetic
    if not syn or "sources" not in syn:
        raise ConfigError("synth needs a [synthetic] table with 'sources' in the config")
    try:
        spec = SyntheticSpec(
            np.array(syn["sources"], dtype=float),
            int(syn.get("m", 200)),
            int(syn.get("seed", cfg.seed)),
            syn.get("names"),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid [synthetic] table: {e}") from e
    ds = generate_synthetic(spec)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out / "samples.csv")
    write_csv(out / "truth.csv", ds.names, spec.true_sources)
    _write_json(out / "config.json", cfg.to_dict())
    return out


# --- detect ------------------------------------------------------------------------

def _load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.data_path is None:
        raise ConfigError("no input data: pass --data or set [data] path in the config")
    raw = load_csv(cfg.data_path)
    if cfg.delta is not None and len(cfg.delta) != raw.K:
        raise ConfigError(f"delta has {len(cfg.delta)} entries for {raw.K} dimensions")
    ds, _ = normalize(raw, cfg.delta)
    return ds


def _write_grids(trace: ChainTrace, cfg: RunConfig, out: Path, valid: Sequence[int]) -> dict:
    regions = {}
    for v in valid:
        grid = contact_probability_grid(trace, GridSpec(v, cfg.cell_length))
        write_csv(out / f"levelset_plane{v}.csv", ["cell_x", "cell_y", "probability"], grid.rows())
        regions[v] = count_regions(grid, 0.5)
        write_csv(out / f"cumulative_means_plane{v}.csv", ["g", "n_e", "n", "n_r"],
                  cumulative_means(trace, v))
    return regions


def _run_chain(cfg: RunConfig, seed: int, out: Path) -> dict:
    ds = _load_dataset(cfg)
    hd = HugData(ds.normalized)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    trace = simulated_annealing(hd, cfg.prior, cfg.sampler, cfg.schedule, seed=seed, r=cfg.r)
    elapsed = time.perf_counter() - t0
    trace.write_jsonl(out / "trace.jsonl")
    _write_json(out / "normalization.json", {"names": ds.names, **ds.spec.to_dict()})
    regions = _write_grids(trace, cfg, out, hd.valid_planes())
    last = trace.records[-1]
    lines = [
        f"seed: {seed}",
        f"samples: {hd.m}  dimensions: {hd.K}  planes: {hd.L}",
        f"iterations: {last.iteration}  saved records: {len(trace.records)}",
        f"runtime: {elapsed:.1f} s",
        f"final source count: {len(last.sources)}",
        f"suggested cluster count (mean n over kept records): {suggested_cluster_count(trace)}",
        f"accepted moves: {trace.header.get('accepted')}",
    ]
    for v in hd.valid_planes():
        g, n_e, n, n_r = cumulative_means(trace, v)[-1]
        lines.append(f"plane {v}: regions with p > 0.5: {regions[v]}; "
                     f"mean g={g:.4f} n_e={n_e:.4f} n={n:.2f} n_r={n_r:.2f}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"seed": seed, "dir": str(out), "runtime": elapsed, "regions": regions}


def cmd_detect(cfg: RunConfig, out: Path) -> list[dict]:
    """Normalise, anneal and write traces, grids and summaries into ``out``."""
    ds = _load_dataset(cfg)  # fail early, before any worker starts
    HugData(ds.normalized).valid_planes()
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_dict())
    if cfg.chains == 1:
        return [_run_chain(cfg, cfg.seed, out)]
    jobs = [(cfg, cfg.seed + i, out / f"chain{i}") for i in range(cfg.chains)]
    with ProcessPoolExecutor(max_workers=cfg.chains) as pool:
        futures = [pool.submit(_run_chain, *job) for job in jobs]
        return [f.result() for f in futures]


# --- cluster -----------------------------------------------------------------------

def _chain_dirs(run_dir: Path) -> list[Path]:
    if (run_dir / "trace.jsonl").exists():
        return [run_dir]
    dirs = sorted(p for p in run_dir.glob("chain*") if (p / "trace.jsonl").exists())
    if not dirs:
        raise DataError(f"no trace.jsonl under {run_dir}")
    return dirs


def _read_normalization(run_dir: Path):
    for d in [run_dir, *_chain_dirs(run_dir)]:
        p = d / "normalization.json"
        if p.exists():
            obj = json.loads(p.read_text(encoding="utf-8"))
            return obj["names"], NormalizationSpec.from_dict(obj)
    raise DataError(f"no normalization.json under {run_dir}")


def _source_table(points, spec, names, extra: Optional[dict] = None) -> list[dict]:
    raw = denormalize(points, spec)
    rows = []
    for q in range(len(points)):
        row = {"normalized": [float(x) for x in points[q]],
               "raw": dict(zip(names, (float(x) for x in raw[q])))}
        for key, vals in (extra or {}).items():
            v = vals[q]
            row[key] = v.tolist() if isinstance(v, np.ndarray) else (
                int(v) if isinstance(v, np.integer) else v)
        rows.append(row)
    return rows


def cmd_cluster(run_dir: Path, cfg: RunConfig) -> dict:
    """Sequential and global k-means on the pooled kept sources, plus diagnostics."""
    traces = [ChainTrace.read_jsonl(d / "trace.jsonl") for d in _chain_dirs(run_dir)]
    names, spec = _read_normalization(run_dir)
    pooled = np.vstack([t.pooled_sources() for t in traces])
    if len(pooled) == 0:
        raise DomainError("the kept records contain no sources")
    cl = cfg.cluster
    result: dict = {
        "pooled_sources": int(len(pooled)),
        "suggested_cluster_count": suggested_cluster_count(
            [r.sources for t in traces for r in t.last()]),
    }
    if cl.k_per_plane:
        sq = sequential_kmeans(pooled, cl.k_per_plane, seed=cl.seed, order=cl.order)
        result["sequential"] = {
            "k_per_plane": {str(k): v for k, v in sorted(cl.k_per_plane.items())},
            "plane_order": sq.order,
            "sources": _source_table(sq.distinct, spec, names,
                                     {"multiplicity": sq.multiplicity}),
        }
    if cl.k_global:
        km = kmeans(pooled, cl.k_global, seed=cl.seed)
        result["global"] = {
            "k": cl.k_global,
            "sources": _source_table(km.medians, spec, names, {
                "mean": denormalize(km.centers, spec),
                "sd": km.sds * (spec.hi - spec.lo),
                "size": km.sizes,
            }),
        }
    if cl.k_range:
        lo, hi = cl.k_range
        top = cl.top or cl.k_global or 1
        mass = cluster_mass_check(pooled, range(int(lo), int(hi) + 1), int(top), seed=cl.seed)
        result["mass_check"] = {"top": int(top), "proportion": {str(k): v for k, v in mass.items()}}
    dend = ward_dendrogram(pooled)
    result["ward"] = {"within_ss": {str(k): dend.within_ss(k)
                                    for k in range(1, min(12, len(pooled)) + 1)}}
    np.savetxt(run_dir / "dendrogram.csv", dend.linkage, delimiter=",",
               header="left,right,height,size", comments="")
    _write_json(run_dir / "clusters.json", result)
    for key in ("sequential", "global"):
        if key in result:
            write_csv(run_dir / f"sources_{key}.csv", names,
                      [list(s["raw"].values()) for s in result[key]["sources"]])
    return result


# --- evaluate ----------------------------------------------------------------------

def cmd_evaluate(run_dir: Path, truth_path: Path, which: Optional[str] = None,
                 matching: str = "optimal") -> dict:
    """Match proposed sources to the truth and write ``errors.csv``."""
    p = run_dir / "clusters.json"
    if not p.exists():
        raise DataError(f"{p} not found; run 'hug cluster' first")
    clusters = json.loads(p.read_text(encoding="utf-8"))
    if which is None:
        which = "global" if "global" in clusters else "sequential"
    if which not in clusters:
        raise DataError(f"clusters.json has no '{which}' result")
    rows = clusters[which]["sources"]
    names = list(rows[0]["raw"])
    proposed = np.array([list(r["raw"].values()) for r in rows])
    truth = load_csv(truth_path)
    if truth.K != len(names):
        raise DataError(f"truth has {truth.K} columns, sources have {len(names)}")
    table = relative_error_table(proposed, truth.samples,
                                 match_sources(proposed, truth.samples, matching), names)
    write_csv(run_dir / "errors.csv", ["proposed", "truth", *names, "mean"],
              [[i, j, *table.cells[q], table.source_means[q]]
               for q, (i, j) in enumerate(table.pairs)])
    report = {
        "which": which,
        "dimension_means": [float(x) for x in table.dimension_means],
        "global_mean": float(table.global_mean),
        "unmatched_proposed": table.unmatched_proposed,
        "unmatched_truth": table.unmatched_truth,
    }
    _write_json(run_dir / "evaluation.json", report)
    return report


# --- argument parsing --------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML run configuration")
    p.add_argument("--preset", choices=sorted(PRESETS), help="schedule preset")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hug", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic mixing dataset")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("detect", help="run simulated annealing on a dataset")
    _add_common(p)
    p.add_argument("--data", help="input CSV (header row of parameter names)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--chains", type=int, help="independent chains, seeds seed..seed+k-1")
    p.add_argument("--delta", help="per-dimension window margins, comma separated ('auto' keeps default)")
    for name, typ in OVERRIDE_FLAGS.items():
        p.add_argument(f"--{name}", type=typ, dest=name)

    p = sub.add_parser("cluster", help="reconstruct sources from a run directory")
    _add_common(p)
    p.add_argument("run_dir", type=Path)
    p.add_argument("--k-per-plane", help="sequential k-means counts, e.g. 3,3,3")
    p.add_argument("--k-global", type=int)
    p.add_argument("--k-range", help="cluster-mass check range, e.g. 5-9")
    p.add_argument("--top", type=int)
    p.add_argument("--order", choices=["random", "fixed"])

    p = sub.add_parser("evaluate", help="relative errors against known sources")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--which", choices=["global", "sequential"])
    p.add_argument("--matching", choices=["optimal", "greedy"], default="optimal")
    return ap


def _cluster_config(args) -> RunConfig:
    cfg = load_config(args.config, preset=args.preset,
                      overrides={"seed": args.seed})
    cl = cfg.cluster
    if args.k_per_plane:
        cl.k_per_plane = _parse_k_per_plane(args.k_per_plane)
    if args.k_global is not None:
        cl.k_global = args.k_global
    if args.k_range:
        try:
            lo, hi = (int(x) for x in args.k_range.split("-"))
        except ValueError as e:
            raise ConfigError(f"--k-range expects 'lo-hi': {e}") from e
        cl.k_range = [lo, hi]
    if args.top is not None:
        cl.top = args.top
    if args.order:
        cl.order = args.order
    if args.seed is not None:
        cl.seed = args.seed
    if not (cl.k_per_plane or cl.k_global or cl.k_range):
        raise ConfigError("nothing to do: give --k-per-plane, --k-global or --k-range")
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            out = cmd_synth(load_config(args.config, preset=args.preset,
                                        overrides={"seed": args.seed}), args.out)
            print(f"wrote {out / 'samples.csv'} and {out / 'truth.csv'}")
        elif args.command == "detect":
            for res in cmd_detect(_config_from_args(args), args.out):
                print(f"{res['dir']}: {res['runtime']:.1f} s, regions with p > 0.5 per plane "
                      f"{res['regions']}")
        elif args.command == "cluster":
            res = cmd_cluster(args.run_dir, _cluster_config(args))
            for key in ("sequential", "global"):
                if key in res:
                    print(f"{key}: {len(res[key]['sources'])} sources")
            if "mass_check" in res:
                print("top-cluster proportions:", res["mass_check"]["proportion"])
        elif args.command == "evaluate":
            rep = cmd_evaluate(args.run_dir, args.truth, args.which, args.matching)
            dims = ", ".join(f"{x:.2f}" for x in rep["dimension_means"])
            print(f"mean error per dimension (%): {dims}; global {rep['global_mean']:.2f}%")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as e:
        print(f"domain error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
