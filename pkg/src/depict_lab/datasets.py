"""Image datasets on disk: one PPM per instance plus a JSONL index."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .render import read_ppm, write_ppm

INDEX = "index.jsonl"


@dataclass
class Dataset:
    images: list[np.ndarray]
    concepts: np.ndarray  # (N, d) uint8
    labels: np.ndarray  # (N,) uint8
    captions: list[str]

    def __len__(self) -> int:
        return len(self.images)


def write_dataset(images, concepts, labels, directory, captions=None) -> Path:
    n = len(images)
    captions = [""] * n if captions is None else list(captions)
    if not (len(concepts) == len(labels) == len(captions) == n):
        raise ValueError("images, concepts, labels and captions must have equal length")
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(n)))
    lines = []
    for i in range(n):
        name = f"img_{i:0{width}d}.ppm"
        write_ppm(out / name, images[i])
        record = {
            "file": name,
            "caption": captions[i],
            "concepts": [int(v) for v in concepts[i]],
            "label": int(labels[i]),
        }
        lines.append(json.dumps(record) + "\n")
    (out / INDEX).write_text("".join(lines))
    return out


def read_dataset(directory) -> Dataset:
    root = Path(directory)
    images, concepts, labels, captions = [], [], [], []
    with open(root / INDEX) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                name, caption = rec["file"], rec["caption"]
                bits = [int(v) for v in rec["concepts"]]
                label = int(rec["label"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{root / INDEX}: corrupt record on line {lineno}: {exc}") from exc
            images.append(read_ppm(root / name))
            concepts.append(bits)
            labels.append(label)
            captions.append(caption)
    d = len(concepts[0]) if concepts else 0
    return Dataset(images, np.array(concepts, dtype=np.uint8).reshape(len(concepts), d),
                   np.array(labels, dtype=np.uint8), captions)
