"""Binary concept space: names, sampling and single-column permutation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COLORS = ("red", "green", "blue")
KINDS = ("circle", "rectangle")

DEFAULT_NAMES = (
    "red circle",
    "green circle",
    "blue circle",
    "red rectangle",
    "green rectangle",
    "blue rectangle",
)


@dataclass(frozen=True)
class ConceptSpace:
    names: tuple[str, ...] = DEFAULT_NAMES

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) < 1:
            raise ValueError("concept space needs at least one concept")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"concept names must be unique: {self.names}")
        for name in self.names:
            color, _, kind = name.partition(" ")
            if color not in COLORS or kind not in KINDS:
                raise ValueError(f"concept name must be '<color> <shape>', got {name!r}")

    @property
    def d(self) -> int:
        return len(self.names)

    def color(self, j: int) -> str:
        return self.names[j].split(" ")[0]

    def kind(self, j: int) -> str:
        return self.names[j].split(" ")[1]

    def index(self, color: str, kind: str) -> int:
        return self.names.index(f"{color} {kind}")

    def kind_codes(self) -> np.ndarray:
        """0 for circle, 1 for rectangle, per concept."""
        return np.array([KINDS.index(self.kind(j)) for j in range(self.d)], dtype=np.int64)

    def color_codes(self) -> np.ndarray:
        return np.array([COLORS.index(self.color(j)) for j in range(self.d)], dtype=np.int64)

    def to_json(self) -> dict:
        return {"names": list(self.names)}

    @classmethod
    def from_json(cls, data: dict) -> "ConceptSpace":
        return cls(tuple(data["names"]))


def as_concept_matrix(m, space: ConceptSpace | None = None) -> np.ndarray:
    """Validate and return ``m`` as an (N, d) uint8 array of 0/1 entries."""
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"concept matrix must be 2-D with at least one row, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("concept matrix entries must be 0 or 1")
    if space is not None and arr.shape[1] != space.d:
        raise ValueError(f"concept matrix has {arr.shape[1]} columns, space has {space.d}")
    return arr.astype(np.uint8)


def sample_concept_vector(rng: np.random.Generator, space: ConceptSpace, p: float = 0.5) -> np.ndarray:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return (rng.random(space.d) < p).astype(np.uint8)


def sample_concept_matrix(rng: np.random.Generator, space: ConceptSpace, n: int, p: float = 0.5) -> np.ndarray:
    """``n`` independent Bernoulli(p) concept vectors, one per row."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return (rng.random((n, space.d)) < p).astype(np.uint8)


def permute_column(m: np.ndarray, j: int, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``m`` with column ``j`` shuffled across rows (uniform Fisher-Yates)."""
    m = np.asarray(m)
    if not 0 <= j < m.shape[1]:
        raise IndexError(f"concept index {j} out of range for {m.shape[1]} concepts")
    out = m.copy()
    out[:, j] = rng.permutation(m[:, j])
    return out
