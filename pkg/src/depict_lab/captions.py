"""Caption text for shape scenes and its strict parser.

Grammar (ASCII)::

    caption := "" | desc (", " desc)*
    desc    := color " circle " int " (" int "," int ")"
             | color " rectangle ((" int "," int ") (" int "," int "))"

The parser accepts any whitespace between tokens.
"""
from __future__ import annotations

import re

from .concepts import COLORS, KINDS, ConceptSpace
from .render import CanvasSpec, Circle, Rect, ShapeScene

_TOKEN = re.compile(r"\s*(?:(?P<word>[A-Za-z]+)|(?P<int>-?\d+)|(?P<punct>[(),])|(?P<bad>\S))")


class CaptionError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


def render_caption(scene: ShapeScene) -> str:
    parts = []
    for j, g in scene.shapes:
        color = scene.space.color(j)
        if isinstance(g, Circle):
            parts.append(f"{color} circle {g.r} ({g.cx},{g.cy})")
        else:
            parts.append(f"{color} rectangle (({g.x1},{g.y1}) ({g.x2},{g.y2}))")
    return ", ".join(parts)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # only trailing whitespace left
            break
        kind = m.lastgroup
        start = m.start(kind)
        if kind == "bad":
            raise CaptionError(f"unexpected character {m.group(kind)!r}", start)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.end = len(text)

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _next(self, what: str):
        tok = self._peek()
        if tok is None:
            raise CaptionError(f"expected {what}, found end of caption", self.end)
        self.i += 1
        return tok

    def punct(self, ch: str) -> None:
        kind, value, off = self._next(repr(ch))
        if kind != "punct" or value != ch:
            raise CaptionError(f"expected {ch!r}, found {value!r}", off)

    def integer(self) -> int:
        kind, value, off = self._next("an integer")
        if kind != "int":
            raise CaptionError(f"expected an integer, found {value!r}", off)
        return int(value)

    def word(self, allowed: tuple[str, ...], what: str) -> tuple[str, int]:
        kind, value, off = self._next(what)
        if kind != "word" or value not in allowed:
            raise CaptionError(f"unknown {what} {value!r}", off)
        return value, off

    def point(self) -> tuple[int, int]:
        self.punct("(")
        x = self.integer()
        self.punct(",")
        y = self.integer()
        self.punct(")")
        return x, y


def parse_caption(text: str, canvas: CanvasSpec | None = None, space: ConceptSpace | None = None) -> ShapeScene:
    """Inverse of :func:`render_caption`.  Placement validity is not checked here."""
    canvas = canvas or CanvasSpec()
    space = space or ConceptSpace()
    p = _Parser(text)
    shapes = []
    seen: set[int] = set()
    while p._peek() is not None:
        if shapes:
            p.punct(",")
        color, off = p.word(COLORS, "colour")
        kind, _ = p.word(KINDS, "shape")
        name = f"{color} {kind}"
        if name not in space.names:
            raise CaptionError(f"concept {name!r} not in the concept space", off)
        j = space.names.index(name)
        if j in seen:
            raise CaptionError(f"concept {name!r} described twice", off)
        seen.add(j)
        if kind == "circle":
            r = p.integer()
            cx, cy = p.point()
            shapes.append((j, Circle(cx, cy, r)))
        else:
            p.punct("(")
            x1, y1 = p.point()
            x2, y2 = p.point()
            p.punct(")")
            shapes.append((j, Rect(x1, y1, x2, y2)))
    return ShapeScene(tuple(shapes), canvas, space)
