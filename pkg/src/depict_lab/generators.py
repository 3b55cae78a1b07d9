"""Text-to-image bridge: an oracle renderer and a corruptible variant."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .captions import parse_caption
from .concepts import ConceptSpace, as_concept_matrix
from .render import CanvasSpec, PlacementError, ShapeScene
from .rng import KeyLike, as_key


@dataclass(frozen=True)
class GeneratorSpec:
    """``flip_rate`` is a scalar or one rate per concept.

    ``couplings`` holds ``(src, dst, rate)`` triples: with probability ``rate``
    the generated presence of ``dst`` is overwritten by that of ``src``,
    which deliberately breaks independent permutation.
    """

    kind: str = "oracle"
    flip_rate: float | tuple[float, ...] = 0.0
    pixel_noise: float = 0.0
    canvas: CanvasSpec = field(default_factory=CanvasSpec)
    space: ConceptSpace = field(default_factory=ConceptSpace)
    couplings: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("oracle", "corrupted"):
            raise ValueError(f"generator kind must be 'oracle' or 'corrupted', got {self.kind!r}")
        rates = self.flip_rates()
        if ((rates < 0) | (rates > 1)).any():
            raise ValueError("flip rates must lie in [0, 1]")
        if self.pixel_noise < 0:
            raise ValueError("pixel_noise must be non-negative")
        couplings = tuple((int(s), int(t), float(r)) for s, t, r in self.couplings)
        object.__setattr__(self, "couplings", couplings)
        for s, t, r in couplings:
            if not (0 <= s < self.space.d and 0 <= t < self.space.d and s != t and 0 <= r <= 1):
                raise ValueError(f"bad coupling {(s, t, r)}")
        if self.kind == "oracle" and (rates.any() or self.pixel_noise or couplings):
            raise ValueError("the oracle generator admits no corruption")

    def flip_rates(self) -> np.ndarray:
        rates = np.broadcast_to(np.asarray(self.flip_rate, dtype=float), (self.space.d,))
        return np.array(rates)

    def to_json(self) -> dict:
        rate = self.flip_rate if np.isscalar(self.flip_rate) else list(self.flip_rate)
        return {
            "kind": self.kind,
            "flip_rate": rate,
            "pixel_noise": self.pixel_noise,
            "canvas": self.canvas.to_json(),
            "space": self.space.to_json(),
            "couplings": [list(c) for c in self.couplings],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GeneratorSpec":
        rate = data["flip_rate"]
        return cls(
            kind=data["kind"],
            flip_rate=rate if np.isscalar(rate) else tuple(rate),
            pixel_noise=data["pixel_noise"],
            canvas=CanvasSpec.from_json(data["canvas"]),
            space=ConceptSpace.from_json(data["space"]),
            couplings=tuple(tuple(c) for c in data.get("couplings", ())),
        )


class Batch(NamedTuple):
    images: np.ndarray  # (N, H, W, 3) uint8
    present: np.ndarray  # (N, d) concepts actually drawn
    geoms: np.ndarray  # (N, d, 4)

    def scene(self, i: int, spec: GeneratorSpec) -> ShapeScene:
        return ShapeScene.from_arrays(self.present[i], self.geoms[i], spec.canvas, spec.space)


def _corruption_args(spec: GeneratorSpec):
    c = spec.couplings
    return (
        spec.flip_rates(),
        np.array([s for s, _, _ in c], dtype=np.int64),
        np.array([t for _, t, _ in c], dtype=np.int64),
        np.array([r for _, _, r in c], dtype=float),
        float(spec.pixel_noise),
    )


def _canvas_args(canvas: CanvasSpec):
    return (*canvas.radius_range, *canvas.side_range, canvas.gap)


def _run_row(spec: GeneratorSpec, bits, present_modes, g_in, key: int):
    canvas, space = spec.canvas, spec.space
    img = np.empty((canvas.height, canvas.width, 3), dtype=np.uint8)
    g_out = np.zeros((space.d, 4), dtype=np.int64)
    present = np.zeros(space.d, dtype=np.uint8)
    ok = K.generate_row(np.uint64(key), np.asarray(bits, dtype=np.uint8), present_modes, g_in,
                        space.kind_codes(), canvas.concept_colors(space),
                        np.array(canvas.background, dtype=np.uint8), *_corruption_args(spec),
                        *_canvas_args(canvas), img, g_out, present)
    if not ok:
        raise PlacementError(f"could not place shapes for concepts {list(np.flatnonzero(present))}")
    return img, ShapeScene.from_arrays(present, g_out, canvas, space)


def generate_scene(spec: GeneratorSpec, caption: str, rng: KeyLike) -> tuple[np.ndarray, ShapeScene]:
    """Image for ``caption`` together with the scene actually drawn."""
    scene = parse_caption(caption, spec.canvas, spec.space)
    bits, g_in = scene.arrays()
    modes = np.full(spec.space.d, K.FRESH, dtype=np.int64)
    for j, _ in scene.shapes:
        modes[j] = K.FIXED
    # stored placements that are out of bounds or clash are re-placed, keeping their size
    for j in scene.invalid_shapes():
        modes[j] = K.MOVE
    return _run_row(spec, bits, modes, g_in, as_key(rng))


def generate(spec: GeneratorSpec, caption: str, rng: KeyLike) -> np.ndarray:
    return generate_scene(spec, caption, rng)[0]


def generate_from_bits(spec: GeneratorSpec, bits, rng: KeyLike) -> np.ndarray:
    """One image with fresh placement; identical to the matching row of :func:`generate_dataset`."""
    modes = np.full(spec.space.d, K.FRESH, dtype=np.int64)
    return _run_row(spec, bits, modes, np.zeros((spec.space.d, 4), dtype=np.int64), as_key(rng))[0]


def generate_batch(spec: GeneratorSpec, m, rng: KeyLike) -> Batch:
    m = as_concept_matrix(m, spec.space)
    canvas, space = spec.canvas, spec.space
    n = m.shape[0]
    images = np.empty((n, canvas.height, canvas.width, 3), dtype=np.uint8)
    geoms = np.zeros((n, space.d, 4), dtype=np.int64)
    present = np.zeros((n, space.d), dtype=np.uint8)
    ok = np.zeros(n, dtype=np.bool_)
    K.generate_batch(np.uint64(as_key(rng)), m, space.kind_codes(), canvas.concept_colors(space),
                     np.array(canvas.background, dtype=np.uint8), *_corruption_args(spec),
                     *_canvas_args(canvas), images, geoms, present, ok)
    if not ok.all():
        row = int(np.flatnonzero(~ok)[0])
        raise PlacementError(f"row {row}: could not place shapes for concepts {list(np.flatnonzero(m[row]))}")
    return Batch(images, present, geoms)


def generate_dataset(spec: GeneratorSpec, m, rng: KeyLike) -> np.ndarray:
    """One image per concept row, in row order; row ``i`` uses stream ``split_key(key, i)``."""
    return generate_batch(spec, m, rng).images
