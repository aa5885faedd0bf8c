"""Shared six-frame fixture: two textured rectangles drifting over a flat
background, plus a hand-written detections CSV whose boxes crop them exactly.

Positions are integers and the textures are pasted verbatim, so the crop of
an object is pixel-identical in every frame; that is what lets the tests
assert exact histogram and descriptor agreement across frames.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np
import pytest

FRAME_W = 320
FRAME_H = 240
BOX_W = 64
BOX_H = 48
FRAME_COUNT = 6
BACKGROUND = 60

# start position (x, y) and per-frame step (dx, dy) of each object; steps are
# small enough that consecutive boxes of one object overlap well and the two
# objects never touch.
OBJECTS = (
    {"start": (20, 40), "step": (6, 0)},
    {"start": (200, 140), "step": (-5, 0)},
)

EXPECTED_KEYS = {
    (frame, det)
    for frame in range(1, FRAME_COUNT + 1)
    for det in range(len(OBJECTS))
}


def object_position(index: int, frame: int) -> tuple[int, int]:
    """Top-left corner of object `index` in 1-based frame `frame`."""
    sx, sy = OBJECTS[index]["start"]
    dx, dy = OBJECTS[index]["step"]
    return sx + dx * (frame - 1), sy + dy * (frame - 1)


def make_textures() -> list[np.ndarray]:
    """One BOX_H x BOX_W x 3 uint8 texture per object, deterministic.

    A small random patch is upscaled with nearest-neighbour interpolation so
    the result has hard edges that keypoint detection latches onto.
    """
    rng = np.random.default_rng(20240814)
    out = []
    for _ in OBJECTS:
        patch = rng.integers(0, 256, size=(12, 16, 3), dtype=np.uint8)
        out.append(cv2.resize(patch, (BOX_W, BOX_H), interpolation=cv2.INTER_NEAREST))
    return out


def write_sequence(root: Path) -> Path:
    """Render the fixture under `root`: frames/frame_000N.png + detections.csv."""
    frames = root / "frames"
    frames.mkdir(parents=True)
    textures = make_textures()
    rows = []
    for frame in range(1, FRAME_COUNT + 1):
        image = np.full((FRAME_H, FRAME_W, 3), BACKGROUND, dtype=np.uint8)
        for index, texture in enumerate(textures):
            x, y = object_position(index, frame)
            image[y : y + BOX_H, x : x + BOX_W] = texture
            rows.append(f"{frame},-1,{x},{y},{BOX_W},{BOX_H},1.0")
        cv2.imwrite(str(frames / f"frame_{frame:04d}.png"), image)
    (root / "detections.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return root


@pytest.fixture(scope="session")
def sequence_dir(tmp_path_factory) -> Path:
    """Six rendered frames plus their detections CSV, built once per run."""
    return write_sequence(tmp_path_factory.mktemp("sequence"))
