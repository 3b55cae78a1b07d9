"""Concept classifiers, logistic regression and concept-bottleneck target models."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from . import _kernels as K
from .concepts import COLORS, ConceptSpace, as_concept_matrix
from .render import CanvasSpec
from .rng import next_float

# shapes whose pixel count fills less than this share of their bounding box are circles
ROUND_BELOW = 0.9
# components smaller than this are treated as speckle
MIN_AREA = 16


@dataclass(frozen=True)
class Component:
    color: int  # palette index in COLORS order
    area: int
    bbox: tuple[int, int, int, int]  # inclusive x0, y0, x1, y1

    @property
    def fill(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return self.area / ((x1 - x0 + 1) * (y1 - y0 + 1))


@dataclass(frozen=True)
class FeatureVector:
    components: tuple[Component, ...]
    histogram: tuple[float, ...]  # pixel share of each palette colour
    n_pixels: int

    def as_array(self, min_area: int = MIN_AREA, round_below: float = ROUND_BELOW) -> np.ndarray:
        """Per colour: pixel share, #round components, #boxy components, largest component share."""
        out = np.zeros((len(COLORS), 4))
        out[:, 0] = self.histogram
        for comp in self.components:
            if comp.area < min_area:
                continue
            out[comp.color, 1 if comp.fill < round_below else 2] += 1
            out[comp.color, 3] = max(out[comp.color, 3], comp.area / self.n_pixels)
        return out.ravel()


def extract_features(img: np.ndarray, canvas: CanvasSpec | None = None) -> FeatureVector:
    canvas = canvas or CanvasSpec()
    h, w = img.shape[:2]
    npx = h * w
    q = np.empty(npx, dtype=np.int64)
    labels = np.empty(npx, dtype=np.int64)
    stack = np.empty(npx + 1, dtype=np.int64)
    counts = np.zeros(len(COLORS), dtype=np.int64)
    color = np.empty(npx, dtype=np.int64)
    area = np.empty(npx, dtype=np.int64)
    box = np.empty((npx, 4), dtype=np.int64)
    n = K.components(np.ascontiguousarray(img, dtype=np.uint8), canvas.reference_colors(), q, labels,
                     stack, counts, color, area, box)
    comps = tuple(Component(int(color[k]), int(area[k]), tuple(int(v) for v in box[k])) for k in range(n))
    hist = tuple(float(np.count_nonzero(q == c)) / npx for c in range(len(COLORS)))
    return FeatureVector(comps, hist, npx)


def feature_matrix(images: np.ndarray, canvas: CanvasSpec | None = None,
                   min_area: int = MIN_AREA, round_below: float = ROUND_BELOW) -> np.ndarray:
    """Batch equivalent of ``extract_features(img).as_array()`` for an (N, H, W, 3) stack."""
    canvas = canvas or CanvasSpec()
    images = np.ascontiguousarray(images, dtype=np.uint8)
    out = np.zeros((images.shape[0], len(COLORS), 4))
    K.summarize_batch(images, canvas.reference_colors(), min_area, round_below, out)
    return out.reshape(images.shape[0], -1)


# ------------------------------------------------------------ logistic regression

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    iterations: int = 500
    l2: float = 1e-3
    record_every: int = 10


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float = 0.0
    iterations: int = 0
    final_loss: float = float("nan")
    losses: list[float] = field(default_factory=list)

    def decision(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.weights + self.bias

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision(x))

    def to_json(self) -> dict:
        return {
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "iterations": self.iterations,
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_json(cls, data: dict) -> "LinearModel":
        return cls(np.array(data["weights"], dtype=float), float(data["bias"]),
                   int(data["iterations"]), float(data["final_loss"]))


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def logistic_loss(weights, bias, x, y, l2=0.0) -> float:
    z = x @ weights + bias
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * weights @ weights)


def logistic_grad(weights, bias, x, y, l2=0.0) -> tuple[np.ndarray, float]:
    resid = _sigmoid(x @ weights + bias) - y
    return x.T @ resid / len(y) + l2 * weights, float(resid.mean())


def train_logistic(features, labels, cfg: TrainConfig = TrainConfig()) -> LinearModel:
    """Full-batch gradient descent on the L2-regularized logistic loss, from zero weights."""
    x = np.array([f.as_array() if isinstance(f, FeatureVector) else f for f in features], dtype=float)
    y = np.asarray(labels, dtype=float)
    if x.ndim != 2 or len(y) != len(x):
        raise ValueError("features and labels must align")
    if np.unique(y).size < 2:
        raise ValueError("training labels contain a single class")
    if cfg.learning_rate <= 0 or cfg.iterations < 0 or cfg.l2 < 0:
        raise ValueError(f"invalid training config {cfg}")
    w = np.zeros(x.shape[1])
    b = 0.0
    losses = [logistic_loss(w, b, x, y, cfg.l2)]
    for it in range(1, cfg.iterations + 1):
        gw, gb = logistic_grad(w, b, x, y, cfg.l2)
        w = w - cfg.learning_rate * gw
        b = b - cfg.learning_rate * gb
        if it % cfg.record_every == 0 or it == cfg.iterations:
            losses.append(logistic_loss(w, b, x, y, cfg.l2))
    return LinearModel(w, b, cfg.iterations, losses[-1], losses)


# ------------------------------------------------------------ concept classifier

@dataclass(frozen=True)
class ConceptPrediction:
    probs: np.ndarray
    bits: np.ndarray


@numba.njit(cache=True, nogil=True)
def _noise_flips(images, salt, rate, d, out):
    state = np.empty(1, dtype=np.uint64)
    for i in range(images.shape[0]):
        state[0] = K.hash_image(images[i], salt)
        for k in range(d):
            out[i, k] = next_float(state) < rate


@dataclass(frozen=True)
class ConceptClassifier:
    """``analytic`` reads shapes off connected components; ``trained`` scores features.

    A positive ``noise_rate`` flips each predicted bit independently, with the
    decision keyed by the image content so repeated calls agree.
    """

    kind: str = "analytic"
    models: tuple[LinearModel, ...] = ()
    noise_rate: float = 0.0
    noise_seed: int = 0
    space: ConceptSpace = field(default_factory=ConceptSpace)
    canvas: CanvasSpec = field(default_factory=CanvasSpec)

    def __post_init__(self):
        if self.kind not in ("analytic", "trained"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must lie in [0, 1]")
        if self.kind == "trained" and len(self.models) != self.space.d:
            raise ValueError("a trained classifier needs one model per concept")

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        """Concept probabilities, shape (N, d)."""
        images = np.ascontiguousarray(images, dtype=np.uint8)
        if images.ndim == 3:
            images = images[None]
        feats = feature_matrix(images, self.canvas)
        if self.kind == "analytic":
            summary = feats.reshape(len(images), len(COLORS), 4)
            probs = np.empty((len(images), self.space.d))
            for j in range(self.space.d):
                col = 1 if self.space.kind(j) == "circle" else 2
                probs[:, j] = summary[:, COLORS.index(self.space.color(j)), col] > 0
        else:
            probs = np.column_stack([m.predict_proba(feats) for m in self.models])
        if self.noise_rate > 0:
            flips = np.zeros(probs.shape, dtype=np.bool_)
            _noise_flips(images, np.uint64(self.noise_seed), self.noise_rate, self.space.d, flips)
            probs = np.where(flips, 1.0 - probs, probs)
        return probs

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "models": [m.to_json() for m in self.models],
            "noise_rate": self.noise_rate,
            "noise_seed": self.noise_seed,
            "space": self.space.to_json(),
            "canvas": self.canvas.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ConceptClassifier":
        return cls(
            kind=data["kind"],
            models=tuple(LinearModel.from_json(m) for m in data["models"]),
            noise_rate=data["noise_rate"],
            noise_seed=data["noise_seed"],
            space=ConceptSpace.from_json(data["space"]),
            canvas=CanvasSpec.from_json(data["canvas"]),
        )


def predict_concepts(h: ConceptClassifier, img: np.ndarray) -> ConceptPrediction:
    probs = h.predict_batch(img)[0]
    return ConceptPrediction(probs, (probs >= 0.5).astype(np.uint8))


def train_concept_classifier(images: np.ndarray, concepts, cfg: TrainConfig = TrainConfig(),
                             space: ConceptSpace | None = None, canvas: CanvasSpec | None = None,
                             ) -> ConceptClassifier:
    """One logistic model per concept on :func:`feature_matrix` features."""
    space = space or ConceptSpace()
    canvas = canvas or CanvasSpec()
    concepts = as_concept_matrix(concepts, space)
    feats = feature_matrix(images, canvas)
    models = tuple(train_logistic(feats, concepts[:, j], cfg) for j in range(space.d))
    return ConceptClassifier("trained", models, space=space, canvas=canvas)


# ------------------------------------------------------------ target models

@dataclass(frozen=True)
class TargetTask:
    """Concept-bottleneck model ``score = w . h(image)`` with a median decision threshold."""

    w: np.ndarray
    threshold: float
    labels: np.ndarray
    bottleneck: ConceptClassifier = field(default_factory=ConceptClassifier)

    def to_json(self) -> dict:
        return {
            "kind": "concept_bottleneck",
            "weights": [float(v) for v in self.w],
            "threshold": float(self.threshold),
            "labels": [int(v) for v in self.labels],
            "concepts": list(self.bottleneck.space.names),
            "bottleneck": self.bottleneck.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TargetTask":
        return cls(np.array(data["weights"], dtype=float), float(data["threshold"]),
                   np.array(data["labels"], dtype=np.uint8), ConceptClassifier.from_json(data["bottleneck"]))


def make_task(rng: np.random.Generator, bottleneck: ConceptClassifier, construction_set,
              weights=None) -> TargetTask:
    """Task with ``w ~ U[0,1]^d`` (unless given); labels are ``w . c > median``."""
    m = as_concept_matrix(construction_set, bottleneck.space)
    d = bottleneck.space.d
    w = rng.random(d) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (d,) or ((w < 0) | (w > 1)).any():
        raise ValueError("task weights must be d values in [0, 1]")
    scores = m @ w
    threshold = float(np.median(scores))
    labels = (scores > threshold).astype(np.uint8)
    if labels.min() == labels.max():
        raise ValueError("task scores do not split into two classes at the median")
    return TargetTask(w, threshold, labels, bottleneck)


def target_scores(t: TargetTask, images: np.ndarray) -> np.ndarray:
    return t.bottleneck.predict_batch(images) @ t.w


def target_score(t: TargetTask, img: np.ndarray) -> float:
    return float(target_scores(t, img)[0])


def target_label(t: TargetTask, img: np.ndarray) -> int:
    return int(target_score(t, img) > t.threshold)


def save_model(path, model: ConceptClassifier | TargetTask) -> None:
    doc = model.to_json()
    if isinstance(model, ConceptClassifier):
        doc = {"type": "concept_classifier", **doc}
    else:
        doc = {"type": "target_task", **doc}
    Path(path).write_text(json.dumps(doc, indent=2))


def load_model(path) -> ConceptClassifier | TargetTask:
    doc = json.loads(Path(path).read_text())
    kind = doc.pop("type")
    if kind == "concept_classifier":
        return ConceptClassifier.from_json(doc)
    if kind == "target_task":
        return TargetTask.from_json(doc)
    raise ValueError(f"unknown model document type {kind!r}")
