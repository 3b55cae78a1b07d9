"""Shape scenes: non-overlapping placement, rasterization and concept masks.

Images are ``(height, width, 3)`` uint8 arrays and masks ``(height, width)``
bool arrays, row-major like the PPM/PBM files they serialize to.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from . import _kernels as K
from .concepts import COLORS, ConceptSpace
from .rng import KeyLike, as_key

DEFAULT_PALETTE = {"red": (255, 0, 0), "green": (0, 255, 0), "blue": (0, 0, 255)}


class PlacementError(RuntimeError):
    pass


@dataclass(frozen=True)
class CanvasSpec:
    width: int = 64
    height: int = 64
    background: tuple[int, int, int] = (255, 255, 255)
    palette: dict = field(default_factory=lambda: dict(DEFAULT_PALETTE))
    radius_range: tuple[int, int] = (5, 10)
    side_range: tuple[int, int] = (8, 16)
    # minimum Chebyshev gap between footprints; keeps same-coloured shapes separate components
    gap: int = 1

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("canvas dimensions must be positive")
        object.__setattr__(self, "background", tuple(int(c) for c in self.background))
        palette = {name: tuple(int(c) for c in rgb) for name, rgb in self.palette.items()}
        object.__setattr__(self, "palette", palette)
        missing = [c for c in COLORS if c not in palette]
        if missing:
            raise ValueError(f"palette lacks colours {missing}")
        refs = [self.background] + [palette[c] for c in COLORS]
        if len(set(refs)) != len(refs):
            raise ValueError("palette colours must be distinct from each other and the background")
        lo, hi = self.radius_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad radius range {self.radius_range}")
        lo, hi = self.side_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad side range {self.side_range}")

    def reference_colors(self) -> np.ndarray:
        """Background followed by the palette in canonical colour order, as int64 rows."""
        return np.array([self.background] + [self.palette[c] for c in COLORS], dtype=np.int64)

    def concept_colors(self, space: ConceptSpace) -> np.ndarray:
        return np.array([self.palette[space.color(j)] for j in range(space.d)], dtype=np.uint8)

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "background": list(self.background),
            "palette": {k: list(v) for k, v in self.palette.items()},
            "radius_range": list(self.radius_range),
            "side_range": list(self.side_range),
            "gap": self.gap,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CanvasSpec":
        return cls(
            width=data["width"],
            height=data["height"],
            background=tuple(data["background"]),
            palette={k: tuple(v) for k, v in data["palette"].items()},
            radius_range=tuple(data["radius_range"]),
            side_range=tuple(data["side_range"]),
            gap=data.get("gap", 1),
        )


@dataclass(frozen=True)
class Circle:
    cx: int
    cy: int
    r: int

    def as_row(self) -> tuple[int, int, int, int]:
        return (self.cx, self.cy, self.r, 0)


@dataclass(frozen=True)
class Rect:
    x1: int
    y1: int
    x2: int
    y2: int

    def as_row(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)


Geometry = Union[Circle, Rect]


@dataclass(frozen=True)
class ShapeScene:
    """At most one shape per concept, ordered by concept index."""

    shapes: tuple[tuple[int, Geometry], ...] = ()
    canvas: CanvasSpec = field(default_factory=CanvasSpec)
    space: ConceptSpace = field(default_factory=ConceptSpace)

    def __post_init__(self):
        shapes = tuple(sorted(((int(j), g) for j, g in self.shapes), key=lambda s: s[0]))
        object.__setattr__(self, "shapes", shapes)
        seen = set()
        for j, g in shapes:
            if not 0 <= j < self.space.d:
                raise ValueError(f"concept index {j} out of range")
            if j in seen:
                raise ValueError(f"concept {self.space.names[j]!r} appears twice")
            seen.add(j)
            want = Circle if self.space.kind(j) == "circle" else Rect
            if not isinstance(g, want):
                raise ValueError(f"concept {self.space.names[j]!r} needs a {want.__name__}")

    @property
    def concepts(self) -> np.ndarray:
        bits = np.zeros(self.space.d, dtype=np.uint8)
        for j, _ in self.shapes:
            bits[j] = 1
        return bits

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        present = np.zeros(self.space.d, dtype=np.uint8)
        geom = np.zeros((self.space.d, 4), dtype=np.int64)
        for j, g in self.shapes:
            present[j] = 1
            geom[j] = g.as_row()
        return present, geom

    @classmethod
    def from_arrays(cls, present, geom, canvas: CanvasSpec, space: ConceptSpace) -> "ShapeScene":
        shapes = []
        for j in range(space.d):
            if present[j]:
                a, b, c, e = (int(v) for v in geom[j])
                shapes.append((j, Circle(a, b, c) if space.kind(j) == "circle" else Rect(a, b, c, e)))
        return cls(tuple(shapes), canvas, space)

    def invalid_shapes(self) -> list[int]:
        """Concepts whose shape is out of bounds or clashes with an earlier kept shape."""
        kinds = self.space.kind_codes()
        _, geom = self.arrays()
        kept: list[int] = []
        bad: list[int] = []
        for j, _ in self.shapes:
            if not K.in_bounds(kinds[j], geom[j], self.canvas.width, self.canvas.height) or any(
                K.conflict(kinds[j], geom[j], kinds[q], geom[q], self.canvas.gap) for q in kept
            ):
                bad.append(j)
            else:
                kept.append(j)
        return bad

    def is_valid(self) -> bool:
        return not self.invalid_shapes()


def place_shapes(v, canvas: CanvasSpec, rng: KeyLike, space: ConceptSpace | None = None) -> ShapeScene:
    """Random overlap-free placement of one shape per set bit of ``v``."""
    space = space or ConceptSpace()
    v = np.asarray(v, dtype=np.uint8)
    if v.shape != (space.d,):
        raise ValueError(f"concept vector must have length {space.d}")
    kinds = space.kind_codes()
    modes = np.where(v == 1, K.FRESH, 0).astype(np.int64)
    geom = np.zeros((space.d, 4), dtype=np.int64)
    state = np.array([as_key(rng)], dtype=np.uint64)
    rmin, rmax = canvas.radius_range
    smin, smax = canvas.side_range
    if not K.place_row(state, kinds, modes, np.zeros_like(geom), geom, canvas.width, canvas.height,
                       rmin, rmax, smin, smax, canvas.gap):
        raise PlacementError(
            f"could not place {int(v.sum())} shapes on a {canvas.width}x{canvas.height} canvas "
            f"after {K.MAX_RESTARTS} restarts"
        )
    return ShapeScene.from_arrays(v, geom, canvas, space)


def rasterize(scene: ShapeScene) -> np.ndarray:
    canvas = scene.canvas
    img = np.empty((canvas.height, canvas.width, 3), dtype=np.uint8)
    present, geom = scene.arrays()
    K.paint(img, scene.space.kind_codes(), present, geom, canvas.concept_colors(scene.space),
            np.array(canvas.background, dtype=np.uint8))
    return img


def shape_mask(kind: str, geom: Geometry, width: int, height: int) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width]
    if kind == "circle":
        return (xs - geom.cx) ** 2 + (ys - geom.cy) ** 2 <= geom.r ** 2
    return (xs >= geom.x1) & (xs <= geom.x2) & (ys >= geom.y1) & (ys <= geom.y2)


def concept_masks(scene: ShapeScene) -> list[np.ndarray]:
    """Ground-truth footprint of every concept (all-false when absent)."""
    w, h = scene.canvas.width, scene.canvas.height
    masks = [np.zeros((h, w), dtype=bool) for _ in range(scene.space.d)]
    for j, g in scene.shapes:
        masks[j] = shape_mask(scene.space.kind(j), g, w, h)
    return masks


# ------------------------------------------------------------ PNM files

def _read_header(data: bytes, magic: bytes, nfields: int, path) -> tuple[list[int], int]:
    if not data.startswith(magic):
        raise ValueError(f"{path}: not a {magic.decode()} file")
    values: list[int] = []
    pos = len(magic)
    while len(values) < nfields:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: malformed header")
        values.append(int(data[start:pos]))
    # exactly one whitespace byte separates header from raster
    return values, pos + 1


def write_ppm(path, img: np.ndarray) -> None:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w, _ = img.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (w, h, maxval), start = _read_header(data, b"P6", 3, path)
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported")
    body = data[start:]
    if len(body) != w * h * 3:
        raise ValueError(f"{path}: truncated PPM raster ({len(body)} of {w * h * 3} bytes)")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()


def write_pbm(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    Path(path).write_bytes(b"P4\n%d %d\n" % (w, h) + np.packbits(mask, axis=1).tobytes())


def read_pbm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (w, h), start = _read_header(data, b"P4", 2, path)
    row_bytes = (w + 7) // 8
    body = data[start:]
    if len(body) != row_bytes * h:
        raise ValueError(f"{path}: truncated PBM raster")
    packed = np.frombuffer(body, dtype=np.uint8).reshape(h, row_bytes)
    return np.unpackbits(packed, axis=1)[:, :w].astype(bool)


def write_pgm(path, values: np.ndarray) -> None:
    """Heat raster scaled so the maximum maps to 255."""
    values = np.asarray(values, dtype=float)
    peak = values.max() if values.size else 0.0
    scaled = np.zeros(values.shape, dtype=np.uint8) if peak <= 0 else np.rint(values / peak * 255).astype(np.uint8)
    h, w = scaled.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + scaled.tobytes())
