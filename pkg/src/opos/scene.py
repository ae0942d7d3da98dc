"""Object catalog, gripper presets, bin layouts and scene files."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from .geometry import EPS, ConvexPolygon, Point2, polygons_intersect, transform_points

SCENE_VERSION = "opos-scene/1"
KINDS = ("cube", "cylinder", "cuboid", "hexagon")
CYLINDER_SIDES = 24
MAX_ATTEMPTS = 10_000


class SceneError(ValueError):
    """Malformed or invalid scene data."""


class CapacityError(RuntimeError):
    """Rejection sampling could not place an object."""


@dataclass(frozen=True)
class ShapeSpec:
    """One catalog object. ``d`` is the cube side, cylinder diameter or hexagon
    across-flats width; cuboids use ``l`` x ``w`` instead."""

    kind: str
    index_name: str
    max_pick: int
    d: float | None = None
    l: float | None = None
    w: float | None = None
    h: float | None = None
    gripper: str = "short"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SceneError(f"unknown shape kind {self.kind!r}")
        needed = ("l", "w") if self.kind == "cuboid" else ("d",)
        for name in needed:
            value = getattr(self, name)
            if value is None or not value > 0:
                raise SceneError(f"{self.index_name}: dimension {name} must be > 0")
        if self.h is not None and not self.h > 0:
            raise SceneError(f"{self.index_name}: dimension h must be > 0")
        if self.max_pick < 1:
            raise SceneError(f"{self.index_name}: max_pick must be >= 1")

    @property
    def effective_width(self) -> float:
        """Size across the closing direction used for the neighbor threshold."""
        if self.kind == "cuboid":
            return min(self.l, self.w)
        return self.d

    @property
    def effective_length(self) -> float:
        """Object length added to the finger length for the gripping area."""
        if self.kind == "cuboid":
            return max(self.l, self.w)
        return self.d

    @property
    def disc_radius(self) -> float:
        """Radius of the disc standing in for the object while fingers close."""
        if self.kind == "hexagon":
            return self.d / math.sqrt(3.0)
        if self.kind == "cuboid":
            raise SceneError("cuboids have no disc model")
        return self.d / 2.0

    @cached_property
    def outline(self) -> np.ndarray:
        """Footprint vertices centered at the origin with zero rotation."""
        if self.kind == "cube":
            h = self.d / 2.0
            return np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
        if self.kind == "cuboid":
            hl, hw = self.l / 2.0, self.w / 2.0
            return np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
        if self.kind == "cylinder":
            n, r = CYLINDER_SIDES, self.d / 2.0
        else:
            n, r = 6, self.d / math.sqrt(3.0)
        t = np.arange(n) * (2.0 * math.pi / n)
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)

    @property
    def circumradius(self) -> float:
        return float(np.hypot(self.outline[:, 0], self.outline[:, 1]).max())

    @property
    def theta_period(self) -> float:
        return 60.0 if self.kind == "hexagon" else 180.0


@dataclass(frozen=True)
class GripperSpec:
    name: str
    finger_length: float
    spread: float
    finger_thickness: float = 10.0

    def __post_init__(self):
        for attr in ("finger_length", "spread", "finger_thickness"):
            if not getattr(self, attr) > 0:
                raise SceneError(f"gripper {self.name}: {attr} must be > 0")


GRIPPERS = {
    "short": GripperSpec("short", 75.0, 84.0),
    "long": GripperSpec("long", 150.0, 84.0),
}

# hexa_m_s and hexa_l_s share d = 23 mm in the source table; both are kept.
CATALOG = {
    s.index_name: s
    for s in (
        ShapeSpec("cube", "cube_s_s", 4, d=20.0, gripper="short"),
        ShapeSpec("cube", "cube_m_s", 4, d=25.4, gripper="short"),
        ShapeSpec("cube", "cube_l_s", 4, d=30.0, gripper="short"),
        ShapeSpec("cube", "cube_l", 3, d=51.0, gripper="long"),
        ShapeSpec("cylinder", "cylin_s_s", 3, d=23.0, h=25.0, gripper="short"),
        ShapeSpec("cylinder", "cylin_m_s", 3, d=28.0, h=25.0, gripper="short"),
        ShapeSpec("cylinder", "cylin_l_s", 3, d=33.0, h=25.0, gripper="short"),
        ShapeSpec("cylinder", "cylin_l", 4, d=38.0, h=30.0, gripper="long"),
        ShapeSpec("cuboid", "cuboid_l", 4, l=106.0, w=30.0, h=35.0, gripper="long"),
        ShapeSpec("hexagon", "hexa_s_s", 4, d=20.0, h=10.0, gripper="short"),
        ShapeSpec("hexagon", "hexa_m_s", 4, d=23.0, h=10.0, gripper="short"),
        ShapeSpec("hexagon", "hexa_l_s", 4, d=23.0, h=10.0, gripper="short"),
    )
}

SIM_BIN = (380.0, 380.0)
REAL_BIN = (305.0, 381.0)


def get_shape(index_name: str) -> ShapeSpec:
    try:
        return CATALOG[index_name]
    except KeyError:
        raise SceneError(f"unknown object index {index_name!r}") from None


def gripper_for(shape: ShapeSpec) -> GripperSpec:
    return GRIPPERS[shape.gripper]


@dataclass(frozen=True)
class PlacedObject:
    id: int
    shape: ShapeSpec
    x: float
    y: float
    theta: float = 0.0

    @property
    def center(self) -> Point2:
        return Point2(self.x, self.y)


def footprint(obj: PlacedObject) -> ConvexPolygon:
    """Projected outline of ``obj`` in the world frame."""
    if obj.shape.kind not in KINDS:
        raise SceneError(f"unknown shape kind {obj.shape.kind!r}")
    return ConvexPolygon(transform_points(obj.shape.outline, obj.theta, (obj.x, obj.y)))


@dataclass(frozen=True, eq=False)
class SceneLayout:
    bin_width: float
    bin_height: float
    objects: tuple[PlacedObject, ...]
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SceneLayout):
            return NotImplemented
        return (
            self.bin_width == other.bin_width
            and self.bin_height == other.bin_height
            and self.seed == other.seed
            and self.objects == other.objects
        )

    def __len__(self) -> int:
        return len(self.objects)

    @property
    def shape(self) -> ShapeSpec | None:
        return self.objects[0].shape if self.objects else None

    @property
    def centers(self) -> np.ndarray:
        if "centers" not in self._cache:
            self._cache["centers"] = np.array(
                [[o.x, o.y] for o in self.objects], dtype=float
            ).reshape(-1, 2)
        return self._cache["centers"]

    @property
    def footprints(self) -> list[ConvexPolygon]:
        if "footprints" not in self._cache:
            self._cache["footprints"] = [footprint(o) for o in self.objects]
        return self._cache["footprints"]

    @property
    def radii(self) -> np.ndarray:
        if "radii" not in self._cache:
            self._cache["radii"] = np.array([o.shape.circumradius for o in self.objects])
        return self._cache["radii"]

    def validate(self) -> None:
        """Raise SceneError on ids, containment or overlap violations."""
        ids = [o.id for o in self.objects]
        if ids != list(range(len(ids))):
            raise SceneError("object ids must be 0..n-1 in order")
        for o, fp in zip(self.objects, self.footprints):
            v = fp.vertices
            if (
                v[:, 0].min() < -EPS
                or v[:, 1].min() < -EPS
                or v[:, 0].max() > self.bin_width + EPS
                or v[:, 1].max() > self.bin_height + EPS
            ):
                raise SceneError(f"object {o.id} extends outside the bin")
        pair = first_overlap(self)
        if pair is not None:
            raise SceneError(f"objects {pair[0]} and {pair[1]} overlap")


def first_overlap(scene: SceneLayout, tol: float = EPS) -> tuple[int, int] | None:
    """First overlapping (or touching) footprint pair, by id order."""
    c, r = scene.centers, scene.radii
    fps = scene.footprints
    n = len(fps)
    if n < 2:
        return None
    d = np.hypot(c[:, None, 0] - c[None, :, 0], c[:, None, 1] - c[None, :, 1])
    near = d <= r[:, None] + r[None, :] + tol
    for i, j in zip(*np.nonzero(np.triu(near, 1))):
        if polygons_intersect(fps[i], fps[j], tol):
            return int(i), int(j)
    return None


def generate_layout(
    shape: ShapeSpec,
    density: int,
    bin_size: tuple[float, float] = SIM_BIN,
    seed: int = 0,
) -> SceneLayout:
    """Place ``density`` non-overlapping copies of ``shape`` uniformly in the bin.

    Orientation is drawn first, then the center uniformly over the positions
    that keep the rotated footprint inside the bin. Touching counts as overlap.
    """
    if density < 1:
        raise SceneError("density must be >= 1")
    width, height = bin_size
    rng = np.random.default_rng(seed)
    outline = shape.outline
    rad = shape.circumradius
    placed: list[PlacedObject] = []
    polys: list[ConvexPolygon] = []
    centers = np.empty((density, 2))
    for idx in range(density):
        for _ in range(MAX_ATTEMPTS):
            theta = float(rng.uniform(0.0, shape.theta_period))
            local = transform_points(outline, theta)
            lo, hi = local.min(axis=0), local.max(axis=0)
            if hi[0] - lo[0] > width or hi[1] - lo[1] > height:
                raise CapacityError(f"{shape.index_name} does not fit in a {width}x{height} bin")
            x = float(rng.uniform(-lo[0], width - hi[0]))
            y = float(rng.uniform(-lo[1], height - hi[1]))
            poly = ConvexPolygon(local + (x, y))
            if idx:
                d = np.hypot(centers[:idx, 0] - x, centers[:idx, 1] - y)
                near = np.flatnonzero(d <= 2 * rad + EPS)
                if any(polygons_intersect(poly, polys[j]) for j in near):
                    continue
            placed.append(PlacedObject(idx, shape, x, y, theta))
            polys.append(poly)
            centers[idx] = (x, y)
            break
        else:
            raise CapacityError(
                f"could not place object {idx + 1} of {density} ({shape.index_name}) "
                f"after {MAX_ATTEMPTS} attempts"
            )
    scene = SceneLayout(float(width), float(height), tuple(placed), int(seed))
    scene._cache["footprints"] = polys
    return scene


def _shape_fields(shape: ShapeSpec) -> dict[str, Any]:
    out: dict[str, Any] = {"shape": shape.kind, "index": shape.index_name, "max_pick": shape.max_pick}
    if shape.kind == "cuboid":
        out.update(l_mm=shape.l, w_mm=shape.w)
    else:
        out["d_mm"] = shape.d
    if shape.h is not None:
        out["h_mm"] = shape.h
    return out


def scene_to_dict(scene: SceneLayout) -> dict[str, Any]:
    objects = []
    for o in scene.objects:
        entry = {"id": o.id, **_shape_fields(o.shape)}
        entry.update(x_mm=o.x, y_mm=o.y, theta_deg=o.theta)
        objects.append(entry)
    return {
        "version": SCENE_VERSION,
        "bin": {"w_mm": scene.bin_width, "h_mm": scene.bin_height},
        "seed": scene.seed,
        "objects": objects,
    }


def _number(entry: dict, key: str, where: str, required: bool = True) -> float | None:
    if key not in entry:
        if required:
            raise SceneError(f"{where}: missing field {key!r}")
        return None
    value = entry[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SceneError(f"{where}.{key}: expected a finite number, got {value!r}")
    return float(value)


def _parse_shape(entry: dict, where: str, shapes: dict) -> ShapeSpec:
    kind = entry.get("shape")
    if kind not in KINDS:
        raise SceneError(f"{where}.shape: unknown shape kind {kind!r}")
    index = entry.get("index", kind)
    if kind == "cuboid":
        dims = dict(l=_number(entry, "l_mm", where), w=_number(entry, "w_mm", where))
    else:
        dims = dict(d=_number(entry, "d_mm", where))
    dims["h"] = _number(entry, "h_mm", where, required=False)
    known = CATALOG.get(index)
    max_pick = entry.get("max_pick", known.max_pick if known else 4)
    key = (kind, index, max_pick, tuple(sorted(dims.items())))
    if key not in shapes:
        gripper = known.gripper if known else "short"
        try:
            shapes[key] = ShapeSpec(kind, index, int(max_pick), gripper=gripper, **dims)
        except SceneError as exc:
            raise SceneError(f"{where}: {exc}") from None
    return shapes[key]


def scene_from_dict(data: Any, validate: bool = True) -> SceneLayout:
    if not isinstance(data, dict):
        raise SceneError("scene: expected a JSON object")
    if data.get("version") != SCENE_VERSION:
        raise SceneError(f"version: expected {SCENE_VERSION!r}, got {data.get('version')!r}")
    bin_ = data.get("bin")
    if not isinstance(bin_, dict):
        raise SceneError("bin: expected an object with w_mm and h_mm")
    width = _number(bin_, "w_mm", "bin")
    height = _number(bin_, "h_mm", "bin")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise SceneError(f"seed: expected an integer, got {seed!r}")
    raw = data.get("objects")
    if not isinstance(raw, list):
        raise SceneError("objects: expected a list")
    shapes: dict = {}
    objects = []
    for i, entry in enumerate(raw):
        where = f"objects[{i}]"
        if not isinstance(entry, dict):
            raise SceneError(f"{where}: expected an object")
        if entry.get("id") != i:
            raise SceneError(f"{where}.id: expected {i}, got {entry.get('id')!r}")
        shape = _parse_shape(entry, where, shapes)
        objects.append(
            PlacedObject(
                i,
                shape,
                _number(entry, "x_mm", where),
                _number(entry, "y_mm", where),
                _number(entry, "theta_deg", where, required=False) or 0.0,
            )
        )
    scene = SceneLayout(width, height, tuple(objects), seed)
    if validate:
        scene.validate()
    return scene


def save_scene(path: str | Path, scene: SceneLayout) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=1) + "\n")


def load_scene(path: str | Path, validate: bool = True) -> SceneLayout:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return scene_from_dict(data, validate=validate)
    except SceneError as exc:
        raise SceneError(f"{path}: {exc}") from None
