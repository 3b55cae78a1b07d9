"""Occlusion saliency and the mean-IOU concept ranking built on it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import _parallel_map, rank_concepts, resolve_workers
from .models import TargetTask, target_scores
from .render import ShapeScene, concept_masks


@dataclass
class SaliencyMask:
    raw: np.ndarray  # max |score change| over patches covering each pixel

    @property
    def mask(self) -> np.ndarray:
        return self.raw > 0


def _offsets(size: int, patch: int, stride: int) -> list[int]:
    offs = list(range(0, size - patch + 1, stride))
    if offs[-1] != size - patch:
        offs.append(size - patch)
    return offs


def occlusion_saliency(f: TargetTask, img: np.ndarray, patch: int = 8, stride: int = 4) -> SaliencyMask:
    """Slide a background-coloured patch over ``img`` and record the score change per pixel."""
    h, w = img.shape[:2]
    if not (1 <= patch <= min(h, w)) or stride < 1:
        raise ValueError(f"patch {patch} / stride {stride} do not fit a {w}x{h} image")
    bg = np.array(f.bottleneck.canvas.background, dtype=np.uint8)
    is_bg = (img == bg).all(axis=2)
    # a patch over pure background leaves the image, hence the score, unchanged
    windows = [(y, x) for y in _offsets(h, patch, stride) for x in _offsets(w, patch, stride)
               if not is_bg[y:y + patch, x:x + patch].all()]
    raw = np.zeros((h, w))
    if not windows:
        return SaliencyMask(raw)
    batch = np.repeat(img[None], len(windows) + 1, axis=0)
    for i, (y, x) in enumerate(windows, start=1):
        batch[i, y:y + patch, x:x + patch] = bg
    scores = target_scores(f, batch)
    deltas = np.abs(scores[1:] - scores[0])
    for (y, x), delta in zip(windows, deltas):
        region = raw[y:y + patch, x:x + patch]
        np.maximum(region, delta, out=region)
    return SaliencyMask(raw)


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    return 0.0 if union == 0 else np.count_nonzero(a & b) / union


@dataclass
class IouRanking:
    mean_iou: list[float | None]  # None when the concept never appears
    ranking: list[int]

    def importance(self) -> np.ndarray:
        """Mean IOU as an importance vector, missing concepts scored 0."""
        return np.array([0.0 if v is None else v for v in self.mean_iou])

    def to_json(self) -> dict:
        return {"mean_iou": self.mean_iou, "ranking": self.ranking}


def iou_ranking(f: TargetTask, images, scenes: list[ShapeScene], patch: int = 8, stride: int = 4,
                workers: int | None = None) -> IouRanking:
    """Mean IOU between saliency masks and each present concept's footprint."""
    if len(images) != len(scenes):
        raise ValueError("one scene per image is required")
    d = f.bottleneck.space.d

    def one(i: int) -> list[float | None]:
        sal = occlusion_saliency(f, images[i], patch, stride).mask
        masks = concept_masks(scenes[i])
        present = scenes[i].concepts
        return [mask_iou(sal, masks[j]) if present[j] else None for j in range(d)]

    rows = _parallel_map(one, list(range(len(images))), resolve_workers(workers))
    means: list[float | None] = []
    for j in range(d):
        vals = [r[j] for r in rows if r[j] is not None]
        means.append(float(np.mean(vals)) if vals else None)
    key = [np.nan if v is None else v for v in means]
    return IouRanking(means, rank_concepts(key))
