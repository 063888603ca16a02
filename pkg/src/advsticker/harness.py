"""Batch experiment driver: seeded runs, aggregates, sweeps, report files.

A batch maps items to independent attack runs. With a synthetic oracle each
item's id seeds its own score landscape; with a remote oracle each item names
a face image scored by the service. Per-run search seeds derive from the
batch seed and the item id, so any single run can be re-executed in
isolation and results do not depend on submission order or worker count.
Reports are plain JSON-typed dicts; `stable_view` strips wall-clock fields so
the remainder is bit-reproducible.
"""

import csv
import hashlib
import json
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .assets import AssetBundle, make_bundle
from .evolution import (
    MODES,
    VARIANTS,
    AttackContext,
    Objective,
    SearchConfig,
    is_success,
    run,
)
from .io import (
    load_face_png,
    load_mask_png,
    load_mask_text,
    load_sticker_png,
    load_surface,
)
from .oracle import RemoteError, RemoteOracle, SyntheticLandscape, SyntheticOracle
from .paramspace import MaskMatrix, ParamBounds, ParamVector, build_valid_index

_SYNTH_ORACLE_KEYS = {"kind", "rows", "cols", "gallery_size", "n_bumps",
                      "sigma_range", "amplitude_range", "phase_range",
                      "base_margin"}
_REMOTE_ORACLE_KEYS = {"kind", "url", "top_k", "timeout", "retries", "backoff"}
_CONFIG_KEYS = {"search", "oracle", "mode", "target", "budget", "angle_range",
                "batch_seed", "assets", "images", "sweep_angle"}

_CSV_COLUMNS = ("image_id", "variant", "status", "success", "nq", "generations",
                "row", "col", "angle", "trigger", "flag", "promoted", "seconds",
                "detail")


class ConfigError(ValueError):
    """The attack configuration cannot be used as given."""


@dataclass(eq=False)
class AttackConfig:
    """Validated run configuration; mirrors the JSON config file."""

    search: SearchConfig
    oracle: dict
    mode: str = "dodging"
    target: str = None
    budget: int = 5000
    angle_range: tuple = (-90.0, 90.0)
    batch_seed: int = 0
    assets: dict = None
    images: list = None
    sweep_angle: float = 0.0


def parse_attack_config(data):
    """Build an AttackConfig from a JSON-shaped dict, rejecting bad input."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        search = SearchConfig(**data.get("search", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"search: {exc}") from None

    oracle = data.get("oracle")
    if not isinstance(oracle, dict) or "kind" not in oracle:
        raise ConfigError("oracle spec with a 'kind' is required")
    kind = oracle["kind"]
    if kind == "synthetic":
        unknown = set(oracle) - _SYNTH_ORACLE_KEYS
        if unknown:
            raise ConfigError(f"unknown synthetic oracle keys: {sorted(unknown)}")
    elif kind == "remote":
        unknown = set(oracle) - _REMOTE_ORACLE_KEYS
        if unknown:
            raise ConfigError(f"unknown remote oracle keys: {sorted(unknown)}")
        if not isinstance(oracle.get("url"), str) or not oracle["url"]:
            raise ConfigError("remote oracle needs a url")
    else:
        raise ConfigError(f"oracle kind must be synthetic or remote, got {kind!r}")

    mode = data.get("mode", "dodging")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    target = data.get("target")
    if mode == "impersonation" and not target:
        raise ConfigError("impersonation needs a target identity")

    budget = data.get("budget", 5000)
    if budget is not None and (not isinstance(budget, int) or budget <= 0):
        raise ConfigError("budget must be a positive integer or null")

    angle_range = data.get("angle_range", (-90.0, 90.0))
    try:
        lo, hi = float(angle_range[0]), float(angle_range[1])
    except (TypeError, ValueError, IndexError):
        raise ConfigError("angle_range must be two numbers") from None
    if lo > hi:
        raise ConfigError("angle_range lower bound exceeds upper bound")

    images = data.get("images")
    if isinstance(images, dict):
        count = images.get("count")
        if not isinstance(count, int) or count < 0:
            raise ConfigError("images.count must be a nonnegative integer")
        images = list(range(count))
    elif images is not None and not isinstance(images, list):
        raise ConfigError("images must be a list or {'count': N}")

    assets = data.get("assets")
    if assets is not None:
        if not isinstance(assets, dict):
            raise ConfigError("assets must be an object")
        if "synthetic" not in assets:
            missing = {"face", "sticker", "surface", "mask"} - set(assets)
            if missing:
                raise ConfigError(f"asset paths missing: {sorted(missing)}")

    return AttackConfig(search=search, oracle=oracle, mode=mode, target=target,
                        budget=budget, angle_range=(lo, hi),
                        batch_seed=int(data.get("batch_seed", 0)),
                        assets=assets, images=images,
                        sweep_angle=float(data.get("sweep_angle", 0.0)))


def load_attack_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_attack_config(data)


def derive_run_seed(batch_seed, image_id):
    """Stable 64-bit per-run seed from the batch seed and the item id."""
    digest = hashlib.sha256(f"{batch_seed}:{image_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def build_assets(config):
    """Materialize the configured asset bundle, or None when not configured."""
    spec = config.assets
    if spec is None:
        return None
    if "synthetic" in spec:
        return make_bundle(**spec["synthetic"])
    mask_path = spec["mask"]
    if str(mask_path).lower().endswith((".txt", ".text")):
        mask = load_mask_text(mask_path)
    else:
        mask = load_mask_png(mask_path)
    return AssetBundle(face=load_face_png(spec["face"]),
                       sticker=load_sticker_png(spec["sticker"]),
                       surface=load_surface(spec["surface"]),
                       mask=mask, index=build_valid_index(mask))


def _item_id(item):
    if isinstance(item, dict):
        return str(item.get("id", item.get("path")))
    return str(item)


class PreparedRun(NamedTuple):
    """One batch item, ready to attack or sweep.

    A non-None `note` means the recognition pre-check excluded the item;
    the context is still usable for diagnostics.
    """

    ctx: AttackContext
    objective: Objective
    mask: MaskMatrix
    note: str = None


def _prepare_synthetic(config, item):
    spec = config.oracle
    rows = int(spec.get("rows", 48))
    cols = int(spec.get("cols", 48))
    knobs = {k: v for k, v in spec.items() if k not in ("kind", "rows", "cols")}
    mask = MaskMatrix(np.ones((rows, cols), dtype=int))
    index = build_valid_index(mask)
    seed = item["seed"] if isinstance(item, dict) else item
    landscape = SyntheticLandscape(seed=int(seed), index=index, **knobs)
    oracle = SyntheticOracle(landscape, budget=config.budget)
    ctx = AttackContext(oracle=oracle, index=index,
                        bounds=ParamBounds.for_index(index, angle=config.angle_range))
    note = None
    if landscape.no_attack().top1 != landscape.ground_truth:
        note = ("clean face not recognized as the true identity "
                f"(top1={landscape.no_attack().top1})")
    objective = Objective(config.mode, landscape.ground_truth, config.target)
    return PreparedRun(ctx, objective, mask, note)


def _prepare_remote(config, item, bundle):
    if bundle is None:
        raise ConfigError("remote runs need an asset bundle (face/sticker/"
                          "surface/mask or synthetic assets)")
    spec = config.oracle
    oracle = RemoteOracle(spec["url"], top_k=spec.get("top_k"),
                          retries=spec.get("retries", 3),
                          backoff=spec.get("backoff", 0.5),
                          timeout=spec.get("timeout", 10.0),
                          budget=config.budget)
    face = bundle.face
    label = None
    if isinstance(item, dict):
        if item.get("path"):
            face = load_face_png(item["path"])
        label = item.get("label")
    # the recognition pre-check is a real (counted) query against the service
    clean = oracle.query(image=face)
    note = None
    if label is not None and clean.top1 != label:
        note = f"clean face not recognized as {label!r} (top1={clean.top1})"
    ground_truth = label if label is not None else clean.top1
    ctx = AttackContext(oracle=oracle, index=bundle.index,
                        bounds=ParamBounds.for_index(bundle.index,
                                                     angle=config.angle_range),
                        face=face, sticker=bundle.sticker,
                        surface=bundle.surface)
    objective = Objective(config.mode, ground_truth, config.target)
    return PreparedRun(ctx, objective, bundle.mask, note)


def prepare_context(config, item, bundle=None):
    """Oracle, attack context, placement mask, and pre-check note for an item."""
    if config.oracle["kind"] == "synthetic":
        return _prepare_synthetic(config, item)
    return _prepare_remote(config, item, bundle)


def _blank_row(image_id, variant):
    return {"image_id": image_id, "variant": variant, "status": None,
            "success": None, "nq": None, "generations": None, "position": None,
            "angle": None, "trigger": None, "flag": None, "promoted": None,
            "seconds": None, "detail": ""}


def _execute_run(config, item, bundle, variant, trace_hook):
    image_id = _item_id(item)
    vname = variant if variant is not None else config.search.variant
    row = _blank_row(image_id, vname)
    started = time.perf_counter()
    try:
        prepared = prepare_context(config, item, bundle)
        if prepared.note is not None:
            row.update(status="excluded", detail=prepared.note)
            return row
        ctx, objective = prepared.ctx, prepared.objective
        search = replace(config.search, variant=vname,
                         seed=derive_run_seed(config.batch_seed, image_id),
                         record_trace=trace_hook is not None)
        result = run(search, objective, ctx)
    except Exception as exc:  # a bad item must not sink the batch
        row.update(status="error", detail=f"{type(exc).__name__}: {exc}",
                   seconds=time.perf_counter() - started)
        return row
    if trace_hook is not None:
        trace_hook(image_id, vname, result)
    position = None
    angle = None
    if result.theta is not None:
        r, c = ctx.index[result.theta.position_index]
        position = [int(r), int(c)]
        angle = float(result.theta.angle)
    row.update(status="success" if result.success else "failure",
               success=bool(result.success), nq=int(result.nq),
               generations=int(result.generations), position=position,
               angle=angle, trigger=result.trigger, flag=int(result.flag),
               promoted=result.promoted, seconds=time.perf_counter() - started)
    return row


def _aggregate(rows):
    completed = [r for r in rows if r["status"] in ("success", "failure")]
    succ = [r for r in completed if r["status"] == "success"]
    nq_succ = [r["nq"] for r in succ]
    nq_all = [r["nq"] for r in completed]
    return {
        "runs": len(rows),
        "completed": len(completed),
        "successes": len(succ),
        "failures": len(completed) - len(succ),
        "excluded": sum(1 for r in rows if r["status"] == "excluded"),
        "errors": sum(1 for r in rows if r["status"] == "error"),
        "fooling_rate": (len(succ) / len(completed)) if completed else None,
        "nq_mean_success": statistics.mean(nq_succ) if nq_succ else None,
        "nq_median_success": statistics.median(nq_succ) if nq_succ else None,
        "nq_mean_all": statistics.mean(nq_all) if nq_all else None,
        "nq_median_all": statistics.median(nq_all) if nq_all else None,
    }


def run_batch(config, items=None, workers=1, trace_hook=None, variant=None):
    """Run one attack per item and assemble the batch report.

    `trace_hook(image_id, variant, attack_result)` — when given — receives
    every finished run (possibly from worker threads) and turns on trace
    recording for them.
    """
    items = config.images if items is None else items
    if not items:
        raise ConfigError("no batch items to run")
    bundle = build_assets(config)
    started = time.perf_counter()
    if workers <= 1:
        rows = [_execute_run(config, it, bundle, variant, trace_hook)
                for it in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(
                lambda it: _execute_run(config, it, bundle, variant, trace_hook),
                items))
    rows.sort(key=lambda r: r["image_id"])
    return {
        "kind": "batch",
        "batch_seed": config.batch_seed,
        "mode": config.mode,
        "budget": config.budget,
        "variant": variant if variant is not None else config.search.variant,
        "oracle": dict(config.oracle),
        "runs": rows,
        "aggregates": _aggregate(rows),
        "timing": {"wall_seconds": time.perf_counter() - started},
        "created": datetime.now(timezone.utc).isoformat(),
    }


_SUMMARY_FIELDS = ("fooling_rate", "successes", "completed", "errors",
                   "nq_mean_success", "nq_median_success", "nq_mean_all",
                   "nq_median_all")


def ablation(config, items=None, variants=VARIANTS, workers=1, trace_hook=None):
    """Run the same item suite under several variants for comparison."""
    started = time.perf_counter()
    blocks = {}
    for name in variants:
        sub = run_batch(config, items=items, workers=workers,
                        trace_hook=trace_hook, variant=name)
        blocks[name] = {"runs": sub["runs"], "aggregates": sub["aggregates"]}
    summary = [dict(variant=name,
                    **{k: blocks[name]["aggregates"][k] for k in _SUMMARY_FIELDS})
               for name in variants]
    return {
        "kind": "ablation",
        "batch_seed": config.batch_seed,
        "mode": config.mode,
        "budget": config.budget,
        "oracle": dict(config.oracle),
        "variants": blocks,
        "summary": summary,
        "timing": {"wall_seconds": time.perf_counter() - started},
        "created": datetime.now(timezone.utc).isoformat(),
    }


_NEIGHBORHOOD = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
                      if dr or dc)


@dataclass(eq=False)
class SweepResult:
    """Per-position outcomes of an exhaustive placement scan at a fixed angle."""

    mask_shape: tuple
    angle: float
    o_star: tuple
    cluster_metric: float
    n_queries: int
    profile: list
    f_true_grid: np.ndarray
    f_wrong_grid: np.ndarray
    success_grid: np.ndarray

    def to_report(self):
        valid = np.isfinite(self.f_true_grid)

        def grid(values, cast):
            return [[cast(values[r, c]) if valid[r, c] else None
                     for c in range(self.mask_shape[1])]
                    for r in range(self.mask_shape[0])]

        return {
            "kind": "sweep",
            "angle": float(self.angle),
            "mask_shape": [int(self.mask_shape[0]), int(self.mask_shape[1])],
            "o_star": [int(self.o_star[0]), int(self.o_star[1])],
            "cluster_metric": (None if self.cluster_metric is None
                               else float(self.cluster_metric)),
            "n_queries": int(self.n_queries),
            "success_count": int(self.success_grid.sum()),
            "profile": self.profile,
            "f_true_grid": grid(self.f_true_grid, float),
            "f_wrong_grid": grid(self.f_wrong_grid, float),
            "success_grid": grid(self.success_grid, lambda v: int(bool(v))),
        }


def exhaustive_sweep(ctx, objective, mask, angle=0.0):
    """Query every valid position once at a fixed angle and map the outcomes.

    The oracle cache is disabled for the scan (and restored afterwards) so
    the query count is exactly the number of valid positions. Finds the
    position of maximal wrong-identity probability, the clustering of the
    success positions, and the radial score profiles around that peak.
    """
    rows, cols = mask.cells.shape
    truth = objective.ground_truth
    f_true = np.full((rows, cols), np.nan)
    f_wrong = np.full((rows, cols), np.nan)
    success = np.zeros((rows, cols), dtype=bool)
    oracle = ctx.oracle
    before = oracle.counter.count
    cache_state = oracle.cache_enabled
    oracle.cache_enabled = False
    try:
        for i, (r, c) in enumerate(ctx.index):
            theta = ParamVector(i, angle)
            image = ctx.render(theta) if oracle.needs_image else None
            result = oracle.query(image=image, params=theta)
            f_true[r, c] = result.prob(truth)
            f_wrong[r, c] = max((p for lab, p in result.items() if lab != truth),
                                default=0.0)
            success[r, c] = is_success(result, objective)
    finally:
        oracle.cache_enabled = cache_state
    n_queries = oracle.counter.count - before

    o_star = None
    best = -math.inf
    for r, c in ctx.index:  # row-major; first strict maximum wins
        if f_wrong[r, c] > best:
            best = f_wrong[r, c]
            o_star = (r, c)

    hits = {(r, c) for r, c in ctx.index if success[r, c]}
    if hits:
        adjacent = sum(1 for r, c in hits
                       if any((r + dr, c + dc) in hits for dr, dc in _NEIGHBORHOOD))
        cluster = adjacent / len(hits)
    else:
        cluster = None

    bins = {}
    for r, c in ctx.index:
        d = int(round(math.dist((r, c), o_star)))
        bins.setdefault(d, []).append((f_true[r, c], f_wrong[r, c]))
    profile = [{"distance": d,
                "f_true": statistics.fmean(v[0] for v in vals),
                "f_wrong": statistics.fmean(v[1] for v in vals),
                "count": len(vals)}
               for d, vals in sorted(bins.items())]

    return SweepResult(mask_shape=(rows, cols), angle=float(angle),
                       o_star=o_star, cluster_metric=cluster,
                       n_queries=n_queries, profile=profile,
                       f_true_grid=f_true, f_wrong_grid=f_wrong,
                       success_grid=success)


def stable_view(report):
    """The report minus wall-clock fields; bit-reproducible across reruns."""

    def clean(rows):
        return [{k: v for k, v in r.items() if k != "seconds"} for r in rows]

    out = {}
    for key, value in report.items():
        if key in ("created", "timing"):
            continue
        if key == "runs":
            out[key] = clean(value)
        elif key == "variants":
            out[key] = {name: {"runs": clean(block["runs"]),
                               "aggregates": block["aggregates"]}
                        for name, block in value.items()}
        else:
            out[key] = value
    return out


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    return value


def _write_runs_csv(path, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for r in rows:
            pos = r.get("position")
            writer.writerow([_csv_cell(v) for v in (
                r["image_id"], r["variant"], r["status"], r["success"],
                r["nq"], r["generations"],
                pos[0] if pos else None, pos[1] if pos else None,
                r["angle"], r["trigger"], r["flag"], r["promoted"],
                r["seconds"], r["detail"])])
    return path


def emit_report(report, out_dir):
    """Write a report directory: full JSON, stable JSON, and CSV views."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    paths["json"] = out / "report.json"
    paths["json"].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    paths["stable_json"] = out / "report.stable.json"
    paths["stable_json"].write_text(
        json.dumps(stable_view(report), indent=2, sort_keys=True) + "\n")

    kind = report.get("kind")
    if kind == "batch":
        paths["csv"] = _write_runs_csv(out / "runs.csv", report["runs"])
    elif kind == "ablation":
        rows = [r for block in report["variants"].values() for r in block["runs"]]
        paths["csv"] = _write_runs_csv(out / "runs.csv", rows)
    elif kind == "sweep":
        grid = np.array([[math.nan if v is None else v for v in row]
                         for row in report["f_wrong_grid"]], dtype=float)
        paths["heatmap"] = out / "heatmap.csv"
        np.savetxt(paths["heatmap"], grid, delimiter=",")
        paths["profile"] = out / "profile.csv"
        with paths["profile"].open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=("distance", "f_true",
                                                    "f_wrong", "count"))
            writer.writeheader()
            writer.writerows(report["profile"])
    return paths
