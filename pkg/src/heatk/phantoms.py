"""Two-material conductivity layouts, case presets, and synthetic noise.

Case geometries are frozen approximations chosen for this project (the presets
pin scalar settings such as boundary temperatures and material values); all
shape containment is tested at cell centers, matching the collocation used
everywhere else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Grid, ScalarField
from .penalties import MaterialPair

_FILLS = ("k_low", "k_high")
_KINDS = ("rectangle", "disk", "polygon")


def _polygon_contains(vertices: np.ndarray, x, y):
    inside = np.zeros(np.shape(x), dtype=bool)
    xs, ys = vertices[:, 0], vertices[:, 1]
    j = len(vertices) - 1
    for i in range(len(vertices)):
        crosses = (ys[i] > y) != (ys[j] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_edge = (xs[j] - xs[i]) * (y - ys[i]) / (ys[j] - ys[i]) + xs[i]
        inside ^= crosses & (x < x_edge)
        j = i
    return inside


@dataclass(frozen=True)
class Shape:
    """One filled region: rectangle (x0, x1, y0, y1), disk (cx, cy, r), or polygon vertices."""

    kind: str
    geometry: tuple
    fill: str = "k_high"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.fill not in _FILLS:
            raise ValueError(f"fill must be one of {_FILLS}")
        geom = self.geometry
        if self.kind == "rectangle":
            if len(geom) != 4 or not (geom[0] < geom[1] and geom[2] < geom[3]):
                raise ValueError("rectangle geometry is (x0, x1, y0, y1) with x0<x1, y0<y1")
            geom = tuple(float(g) for g in geom)
        elif self.kind == "disk":
            if len(geom) != 3 or geom[2] <= 0:
                raise ValueError("disk geometry is (cx, cy, r) with r > 0")
            geom = tuple(float(g) for g in geom)
        else:
            if len(geom) < 3:
                raise ValueError("polygon needs at least three vertices")
            geom = tuple((float(px), float(py)) for px, py in geom)
        object.__setattr__(self, "geometry", geom)

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "rectangle":
            x0, x1, y0, y1 = self.geometry
            return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        if self.kind == "disk":
            cx, cy, r = self.geometry
            return (x - cx) ** 2 + (y - cy) ** 2 <= r * r
        return _polygon_contains(np.asarray(self.geometry), x, y)

    def bounds(self) -> tuple[float, float, float, float]:
        if self.kind == "rectangle":
            return self.geometry
        if self.kind == "disk":
            cx, cy, r = self.geometry
            return (cx - r, cx + r, cy - r, cy + r)
        verts = np.asarray(self.geometry)
        return (verts[:, 0].min(), verts[:, 0].max(), verts[:, 1].min(), verts[:, 1].max())


@dataclass(frozen=True)
class PhantomSpec:
    """A two-material layout on the unit square plus its boundary data."""

    pair: MaterialPair
    background: str = "k_low"
    shapes: tuple = ()
    T1: float = 1.0
    T2: float = 0.0
    c_value: float = 1.0
    gamma_fraction: float = 0.01

    def __post_init__(self):
        if self.background not in _FILLS:
            raise ValueError(f"background must be one of {_FILLS}")
        if not self.T1 > self.T2:
            raise ValueError("boundary temperatures must satisfy T1 > T2")
        if self.c_value < 0:
            raise ValueError("c must be nonnegative")
        if self.gamma_fraction <= 0:
            raise ValueError("gamma_fraction must be positive")
        shapes = tuple(self.shapes)
        for s in shapes:
            x0, x1, y0, y1 = s.bounds()
            if x0 < 0.0 or x1 > 1.0 or y0 < 0.0 or y1 > 1.0:
                raise ValueError(f"shape {s.kind} extends outside the unit square")
        object.__setattr__(self, "shapes", shapes)

    def fill_value(self, token: str) -> float:
        return self.pair.k_low if token == "k_low" else self.pair.k_high

    def conductivity(self, x, y):
        """Conductivity at arbitrary points; the last containing shape wins."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.full(x.shape, self.fill_value(self.background))
        for shape in self.shapes:
            out[shape.contains(x, y)] = self.fill_value(shape.fill)
        return out

    def to_json_dict(self) -> dict:
        return {
            "pair": {"k_low": self.pair.k_low, "k_high": self.pair.k_high},
            "background": self.background,
            "shapes": [
                {"kind": s.kind, "geometry": _geometry_json(s), "fill": s.fill}
                for s in self.shapes
            ],
            "T1": self.T1,
            "T2": self.T2,
            "c": self.c_value,
            "gamma_fraction": self.gamma_fraction,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PhantomSpec":
        try:
            pair = MaterialPair(float(data["pair"]["k_low"]), float(data["pair"]["k_high"]))
            shapes = tuple(
                Shape(kind=s["kind"], geometry=_geometry_tuple(s), fill=s["fill"])
                for s in data.get("shapes", ())
            )
            return cls(
                pair=pair,
                background=data.get("background", "k_low"),
                shapes=shapes,
                T1=float(data["T1"]),
                T2=float(data["T2"]),
                c_value=float(data.get("c", 1.0)),
                gamma_fraction=float(data.get("gamma_fraction", 0.01)),
            )
        except KeyError as exc:
            raise ValueError(f"phantom JSON is missing key {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "PhantomSpec":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _geometry_json(shape: Shape):
    if shape.kind == "polygon":
        return [list(v) for v in shape.geometry]
    return list(shape.geometry)


def _geometry_tuple(entry: dict):
    geom = entry["geometry"]
    if entry["kind"] == "polygon":
        return tuple(tuple(v) for v in geom)
    return tuple(geom)


_CASES = {
    "I": PhantomSpec(
        pair=MaterialPair(1.0, 300.0),
        shapes=(
            Shape("rectangle", (0.2, 0.4, 0.2, 0.4)),
            Shape("rectangle", (0.6, 0.8, 0.6, 0.8)),
        ),
        T1=322.0,
        T2=283.0,
        c_value=1.0,
        gamma_fraction=0.01,
    ),
    # the two-material values for this layout are not pinned anywhere; reuse case I's
    "II": PhantomSpec(
        pair=MaterialPair(1.0, 300.0),
        shapes=(
            Shape("disk", (0.3, 0.68, 0.16)),
            Shape("rectangle", (0.56, 0.88, 0.16, 0.44)),
        ),
        T1=318.15,
        T2=288.15,
        c_value=1.0,
        gamma_fraction=0.0125,
    ),
    "III": PhantomSpec(
        pair=MaterialPair(0.7, 100.0),
        shapes=(
            Shape(
                "polygon",
                ((0.2, 0.2), (0.64, 0.2), (0.64, 0.4), (0.4, 0.4), (0.4, 0.72), (0.2, 0.72)),
            ),
        ),
        T1=373.15,
        T2=353.15,
        c_value=1.0,
        gamma_fraction=0.0125,
    ),
    "IV": PhantomSpec(
        pair=MaterialPair(20.0, 125.0),
        shapes=(
            Shape(
                "polygon",
                (
                    (0.24, 0.18), (0.5, 0.12), (0.66, 0.3), (0.86, 0.38), (0.72, 0.56),
                    (0.76, 0.78), (0.52, 0.7), (0.38, 0.86), (0.26, 0.62), (0.12, 0.44),
                ),
            ),
        ),
        T1=308.15,
        T2=298.15,
        c_value=1.0,
        gamma_fraction=0.3153,
    ),
}


def make_case(case_id: str) -> PhantomSpec:
    """Frozen preset layouts I through IV."""
    try:
        return _CASES[case_id.upper()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown case {case_id!r}; expected one of {sorted(_CASES)}") from None


def rasterize(spec: PhantomSpec, grid: Grid) -> ScalarField:
    """Conductivity sampled at cell centers."""
    values = spec.conductivity(grid.centers[:, 0], grid.centers[:, 1])
    return ScalarField(grid, values, role="conductivity")


def add_noise(field: ScalarField, relative_level: float, seed: int) -> ScalarField:
    """Add seeded Gaussian noise scaled by the field's RMS value.

    Level 0 returns the field unchanged; identical seeds give identical output.
    """
    if relative_level < 0:
        raise ValueError("noise level must be nonnegative")
    if relative_level == 0:
        return field
    rng = np.random.default_rng(seed)
    rms = float(np.sqrt(np.mean(field.values**2)))
    noisy = field.values + relative_level * rms * rng.standard_normal(field.values.size)
    try:
        return ScalarField(field.grid, noisy, role=field.role)
    except ValueError:
        # noise can push a bounded role out of range; keep the values, drop the tag
        return ScalarField(field.grid, noisy, role=None)
