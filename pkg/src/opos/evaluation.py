"""Metrics, evaluation protocols, ablation variants and threshold sweeps."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .planner import DEFAULT_HC, Planner, execute, execution_rng
from .scene import GRIPPERS, REAL_BIN, SIM_BIN, CapacityError, SceneLayout, generate_layout, get_shape

log = logging.getLogger(__name__)

CONFIG_VERSION = "opos-config/1"
CSV_COLUMNS = (
    "scene_seed",
    "object",
    "density",
    "k",
    "variant",
    "available",
    "planned_p",
    "executed_q",
    "picks_used",
    "clusters_inspected",
    "confidence",
)
SMALL_DENSITIES = (20, 25, 30, 35, 40)
LARGE_DENSITIES = (10, 15, 20, 25, 30)
# the 380 mm bin cannot reliably hold more of these by rejection sampling
CROWDED_DENSITIES = {"cube_l": (10, 15, 20), "cuboid_l": (10, 15)}
SRNC_THRESHOLDS = (0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0)
# name -> (ranked, mode, threshold override)
VARIANTS = {
    "PA": (True, "threshold", None),
    "B-1": (False, "threshold", None),
    "B-2": (True, "first_k", None),
    "B-3": (False, "threshold", 1.0),
}


class ConfigError(ValueError):
    """Invalid run configuration."""


class AggregationError(ValueError):
    """Records from different strata were mixed."""


class StratumError(RuntimeError):
    """A protocol stratum could not be run."""


def default_densities(index_name: str) -> tuple[int, ...]:
    """Densities swept when a config names none; large objects use sparser bins."""
    if index_name in CROWDED_DENSITIES:
        return CROWDED_DENSITIES[index_name]
    shape = get_shape(index_name)
    return LARGE_DENSITIES if shape.effective_width >= 38.0 else SMALL_DENSITIES


@dataclass(frozen=True)
class RunConfig:
    object: str = "cube_m_s"
    gripper: str | None = None
    densities: tuple[int, ...] | None = None
    k_values: tuple[int, ...] | None = None
    n_scenes: int = 200
    base_seed: int = 0
    h_c: float = DEFAULT_HC
    predictor: str = "oracle"
    noise_sigma_mm: float = 2.0
    output_dir: str = "results"
    bin: str = "sim"
    ablation_k: int = 3
    srnc_thresholds: tuple[float, ...] = SRNC_THRESHOLDS
    jobs: int | None = None

    def __post_init__(self):
        try:
            shape = get_shape(self.object)
        except Exception as exc:
            raise ConfigError(str(exc)) from None
        if self.densities is None:
            object.__setattr__(self, "densities", default_densities(self.object))
        object.__setattr__(self, "densities", tuple(int(d) for d in self.densities))
        if self.k_values is None:
            # 2, 3 and 4 where the object allows that many
            object.__setattr__(self, "k_values", tuple(range(2, min(4, shape.max_pick) + 1)))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        object.__setattr__(self, "srnc_thresholds", tuple(float(h) for h in self.srnc_thresholds))
        if self.gripper is not None and self.gripper not in GRIPPERS:
            raise ConfigError(f"unknown gripper {self.gripper!r}")
        if not self.densities or any(d < 1 for d in self.densities):
            raise ConfigError("densities must be positive")
        bad = [k for k in self.k_values + (self.ablation_k,) if not 1 <= k <= shape.max_pick]
        if bad:
            raise ConfigError(f"k values {bad} exceed max_pick {shape.max_pick} of {self.object}")
        if self.n_scenes < 1:
            raise ConfigError("n_scenes must be >= 1")
        if not 0.0 < self.h_c <= 1.0 or any(not 0.0 < h <= 1.0 for h in self.srnc_thresholds):
            raise ConfigError("thresholds must lie in (0, 1]")
        if self.predictor not in ("oracle", "heuristic"):
            raise ConfigError(f"unknown predictor {self.predictor!r}")
        if self.noise_sigma_mm < 0:
            raise ConfigError("noise_sigma_mm must be >= 0")
        if self.bin not in ("sim", "real"):
            raise ConfigError(f"bin must be 'sim' or 'real', got {self.bin!r}")

    @property
    def shape(self):
        return get_shape(self.object)

    @property
    def gripper_spec(self):
        return GRIPPERS[self.gripper or self.shape.gripper]

    @property
    def bin_size(self) -> tuple[float, float]:
        return SIM_BIN if self.bin == "sim" else REAL_BIN

    def to_dict(self) -> dict:
        d = asdict(self)
        d["version"] = CONFIG_VERSION
        for key in ("densities", "k_values", "srnc_thresholds"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = dict(data)
        version = data.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version!r}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(read_config_dict(path))


def read_config_dict(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return data


@dataclass(frozen=True)
class EvalRecord:
    scene_seed: int
    object: str
    density: int
    k: int
    variant: str
    available: bool
    planned_p: int
    executed_q: int
    picks_used: int
    clusters_inspected: int
    confidence: float

    def csv_row(self) -> list[str]:
        return [
            str(self.scene_seed),
            self.object,
            str(self.density),
            str(self.k),
            self.variant,
            "1" if self.available else "0",
            str(self.planned_p),
            str(self.executed_q),
            str(self.picks_used),
            str(self.clusters_inspected),
            f"{self.confidence:.6f}",
        ]


@dataclass(frozen=True)
class MetricsRow:
    object: str
    density: int
    k: int
    variant: str
    n_scenes: int
    n_available: int
    n_exact: int
    mean_np: float
    mean_clusters_inspected: float

    @property
    def ar(self) -> float:
        return 100.0 * self.n_available / self.n_scenes

    @property
    def esr(self) -> float:
        return 100.0 * self.n_exact / self.n_available if self.n_available else 0.0

    @property
    def osr(self) -> float:
        return 100.0 * self.n_exact / self.n_scenes

    def identity_holds(self) -> bool:
        """OSR = AR x ESR, checked exactly on integer counts."""
        if self.n_available == 0:
            return self.n_exact == 0
        osr = Fraction(self.n_exact, self.n_scenes)
        return osr == Fraction(self.n_available, self.n_scenes) * Fraction(self.n_exact, self.n_available)


def picks_needed(k: int, p: int, q: int) -> int:
    """Picking motions to transfer exactly k objects, with perfect single picks
    covering any shortfall or return."""
    if k < 1 or p < 0 or q < 0:
        raise ValueError("need k >= 1 and p, q >= 0")
    if p == 0:
        return k
    return 1 + abs(k - q)


def compute_metrics(records: Sequence[EvalRecord]) -> MetricsRow:
    if not records:
        raise AggregationError("no records to aggregate")
    keys = {(r.object, r.density, r.k, r.variant) for r in records}
    if len(keys) > 1:
        raise AggregationError(f"records span {len(keys)} strata: {sorted(keys)}")
    obj, density, k, variant = keys.pop()
    avail = [r for r in records if r.available]
    exact = sum(1 for r in avail if r.executed_q == r.k)
    return MetricsRow(
        obj,
        density,
        k,
        variant,
        len(records),
        len(avail),
        exact,
        float(np.mean([r.picks_used for r in records])),
        float(np.mean([r.clusters_inspected for r in records])),
    )


def metrics_from_counts(n: int, available: int, exact: int) -> MetricsRow:
    return MetricsRow("", 0, 0, "", n, available, exact, 0.0, 0.0)


def group_metrics(records: Iterable[EvalRecord]) -> list[MetricsRow]:
    """One MetricsRow per (object, density, k, variant), in first-seen order."""
    strata: dict[tuple, list[EvalRecord]] = {}
    for r in records:
        strata.setdefault((r.object, r.density, r.k, r.variant), []).append(r)
    return [compute_metrics(v) for v in strata.values()]


def scene_seed(base_seed: int, index_name: str, density: int, index: int) -> int:
    """Seed of one layout; shared by every k and variant run on that layout."""
    ss = np.random.SeedSequence([base_seed, zlib.crc32(index_name.encode()), density, index])
    return int(ss.generate_state(1)[0])


def make_scene(cfg: RunConfig, density: int, index: int) -> SceneLayout:
    seed = scene_seed(cfg.base_seed, cfg.object, density, index)
    try:
        return generate_layout(cfg.shape, density, cfg.bin_size, seed)
    except CapacityError as exc:
        raise StratumError(f"{cfg.object} density {density}: {exc}") from exc


def _execute(cfg: RunConfig, scene: SceneLayout, pose, k: int) -> int:
    rng = execution_rng(scene.seed, k)
    return execute(scene, pose, cfg.noise_sigma_mm, rng, cfg.shape, cfg.gripper_spec).picked


def _protocol_trial(cfg: RunConfig, density: int, index: int) -> list[EvalRecord]:
    scene = make_scene(cfg, density, index)
    planner = Planner(scene, cfg.shape, cfg.gripper_spec)
    out = []
    for k in cfg.k_values:
        direct = planner.select(k, cfg.predictor, cfg.h_c)
        if direct.found:
            p, plan = k, direct
        elif k > 1:
            p, plan = planner.cascade(k - 1, cfg.predictor, cfg.h_c)
        else:
            p, plan = 0, direct
        q = _execute(cfg, scene, plan.pose, k) if p else 0
        out.append(
            EvalRecord(
                scene.seed, cfg.object, density, k, "PA", direct.found, p, q,
                picks_needed(k, p, q), direct.clusters_inspected, direct.confidence,
            )
        )
    return out


def _ablation_trial(cfg: RunConfig, density: int, index: int) -> list[EvalRecord]:
    scene = make_scene(cfg, density, index)
    planner = Planner(scene, cfg.shape, cfg.gripper_spec)
    k = cfg.ablation_k
    out = []
    for name, (ranked, mode, hc) in VARIANTS.items():
        res = planner.select(k, cfg.predictor, hc or cfg.h_c, ranked, mode)
        p = k if res.found else 0
        q = _execute(cfg, scene, res.pose, k) if res.found else 0
        out.append(
            EvalRecord(
                scene.seed, cfg.object, density, k, name, res.found, p, q,
                picks_needed(k, p, q), res.clusters_inspected, res.confidence,
            )
        )
    return out


def _srnc_trial(cfg: RunConfig, density: int, index: int) -> list[EvalRecord]:
    scene = make_scene(cfg, density, index)
    planner = Planner(scene, cfg.shape, cfg.gripper_spec)
    k = cfg.ablation_k
    out = []
    for hc in cfg.srnc_thresholds:
        res = planner.select(k, cfg.predictor, hc)
        p = k if res.found else 0
        q = _execute(cfg, scene, res.pose, k) if res.found else 0
        out.append(
            EvalRecord(
                scene.seed, cfg.object, density, k, f"hc={hc:g}", res.found, p, q,
                picks_needed(k, p, q), res.clusters_inspected, res.confidence,
            )
        )
    return out


def _call(args):
    fn, cfg, density, index = args
    return fn(cfg, density, index)


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        env = os.environ.get("OPOS_JOBS")
        jobs = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(jobs))


def _run(fn: Callable, cfg: RunConfig, jobs: int | None) -> list[EvalRecord]:
    tasks = [(fn, cfg, d, i) for d in cfg.densities for i in range(cfg.n_scenes)]
    jobs = resolve_jobs(jobs if jobs is not None else cfg.jobs)
    if jobs == 1 or len(tasks) == 1:
        results = [_call(t) for t in tasks]
    else:
        # map preserves task order, so output does not depend on scheduling
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_call, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    return [r for batch in results for r in batch]


def run_protocol(cfg: RunConfig, jobs: int | None = None) -> tuple[list[MetricsRow], list[EvalRecord]]:
    records = _run(_protocol_trial, cfg, jobs)
    records = [r for _, r in sorted(enumerate(records), key=lambda t: (t[1].density, t[1].k, t[0]))]
    return group_metrics(records), records


def run_ablation(cfg: RunConfig, jobs: int | None = None) -> tuple[list[MetricsRow], list[EvalRecord]]:
    records = _run(_ablation_trial, cfg, jobs)
    order = {v: i for i, v in enumerate(VARIANTS)}
    records = [r for _, r in sorted(enumerate(records), key=lambda t: (order[t[1].variant], t[1].density, t[0]))]
    return group_metrics(records), records


@dataclass(frozen=True)
class SrncPoint:
    h_c: float
    osr: float
    mean_clusters_inspected: float
    n_scenes: int


def run_srnc(cfg: RunConfig, jobs: int | None = None) -> tuple[list[SrncPoint], list[EvalRecord]]:
    """Sweep the threshold on a fixed scene set (PA variant, k = ablation_k)."""
    records = _run(_srnc_trial, cfg, jobs)
    points = []
    for hc in cfg.srnc_thresholds:
        tag = f"hc={hc:g}"
        sel = [r for r in records if r.variant == tag]
        exact = sum(1 for r in sel if r.available and r.executed_q == r.k)
        points.append(
            SrncPoint(hc, 100.0 * exact / len(sel), float(np.mean([r.clusters_inspected for r in sel])), len(sel))
        )
    return points, records


def srnc_sweep(cfg: RunConfig, jobs: int | None = None) -> list[SrncPoint]:
    """Threshold sweep; the config's predictor is replaced by the heuristic."""
    return run_srnc(replace(cfg, predictor="heuristic"), jobs)[0]


def records_csv(records: Iterable[EvalRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


SUMMARY_COLUMNS = ("object", "density", "k", "variant", "n", "AR", "ESR", "OSR", "NP", "clusters")


def _summary_cells(row: MetricsRow) -> list[str]:
    return [
        row.object,
        str(row.density),
        str(row.k),
        row.variant,
        str(row.n_scenes),
        f"{row.ar:.2f}",
        f"{row.esr:.2f}",
        f"{row.osr:.2f}",
        f"{row.mean_np:.3f}",
        f"{row.mean_clusters_inspected:.3f}",
    ]


def summary_csv(rows: Iterable[MetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow(_summary_cells(r))
    return buf.getvalue()


def format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(str(c).rjust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)


def summary_table(rows: Sequence[MetricsRow]) -> str:
    return format_table(SUMMARY_COLUMNS, [_summary_cells(r) for r in rows])


def ablation_table(rows: Sequence[MetricsRow]) -> str:
    """Variant by density grid of 'clusters/OSR/ESR', plus the average column."""
    densities = sorted({r.density for r in rows})
    variants = list(dict.fromkeys(r.variant for r in rows))
    cell = {(r.variant, r.density): r for r in rows}
    body = []
    for v in variants:
        line = [v]
        for d in densities:
            r = cell.get((v, d))
            line.append(f"{r.mean_clusters_inspected:.2f}/{r.osr:.2f}/{r.esr:.2f}" if r else "-")
        got = [cell[(v, d)] for d in densities if (v, d) in cell]
        line.append(
            "/".join(f"{np.mean(vals):.2f}" for vals in zip(*[(r.mean_clusters_inspected, r.osr, r.esr) for r in got]))
        )
        body.append(line)
    return format_table(["variant"] + [str(d) for d in densities] + ["average"], body)


def srnc_csv(points: Iterable[SrncPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("h_c", "osr", "mean_clusters_inspected", "n_scenes"))
    for p in points:
        w.writerow((f"{p.h_c:g}", f"{p.osr:.2f}", f"{p.mean_clusters_inspected:.3f}", p.n_scenes))
    return buf.getvalue()


def write_atomic(path: str | Path, text: str) -> None:
    """Write through a temporary file and rename, so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
