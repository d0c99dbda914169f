"""Synthetic video traces with known scene cuts.

Each scene is a two-level texture (stripes or checkerboard) whose gray levels
are unique to the scene, so consecutive scenes have disjoint histograms.  The
texture period sets the edge density and therefore the complexity category.
Within a scene the texture pans by one pixel per frame and carries +-1 noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from .frameio import Frame, encode_netpbm, write_manifest

VID_CLASSES = (
    "airplane", "antelope", "bear", "bicycle", "bird", "bus", "car", "cattle", "dog",
    "domestic_cat", "elephant", "fox", "giant_panda", "hamster", "horse", "lion", "lizard",
    "monkey", "motorcycle", "rabbit", "red_panda", "sheep", "snake", "squirrel", "tiger",
    "train", "turtle", "watercraft", "whale", "zebra",
)

PERIODS = (48, 24, 16, 12, 8, 6, 5, 4, 3, 2)
MAX_SCENES = 42
LEVEL_STEP = 3


@dataclass(frozen=True)
class SceneSpec:
    low: int
    high: int
    period: int
    pattern: str
    label: str


def scene_cuts(n_frames: int, n_scenes: int, rng: np.random.Generator) -> List[int]:
    """Sorted frame indices (excluding 0) where a new scene starts."""
    if n_scenes > n_frames:
        raise ValueError(f"cannot fit {n_scenes} scenes in {n_frames} frames")
    if n_scenes < 1:
        raise ValueError("need at least one scene")
    picks = rng.choice(np.arange(1, n_frames), n_scenes - 1, replace=False)
    return sorted(int(c) for c in picks)


def make_scenes(n_scenes: int, rng: np.random.Generator) -> List[SceneSpec]:
    if n_scenes > MAX_SCENES:
        raise ValueError(f"at most {MAX_SCENES} scenes have pairwise disjoint histograms")
    slots = rng.permutation(MAX_SCENES)[:n_scenes]
    scenes = []
    for k, j in enumerate(slots):
        low = 2 + LEVEL_STEP * int(j)
        high = 253 - LEVEL_STEP * int(j)
        period = PERIODS[int(rng.integers(len(PERIODS)))]
        pattern = ("stripes", "checker")[int(rng.integers(2))]
        scenes.append(SceneSpec(low, high, period, pattern, VID_CLASSES[k % len(VID_CLASSES)]))
    return scenes


def render(scene: SceneSpec, offset: int, size: int, rng: np.random.Generator) -> Frame:
    y, x = np.mgrid[0:size, 0:size]
    xs = x + offset
    if scene.pattern == "stripes":
        on = (xs // scene.period) % 2 == 1
    else:
        on = ((xs // scene.period) + (y // scene.period)) % 2 == 1
    px = np.where(on, scene.high, scene.low) + rng.integers(-1, 2, size=(size, size))
    gray = np.clip(px, 0, 255).astype(np.uint8)
    return Frame(np.repeat(gray[:, :, None], 3, axis=2))


def synth_frames(n_frames: int, n_scenes: int, seed: int = 0, size: int = 96):
    """Return ``(frames, labels, cuts)`` for an in-memory synthetic trace."""
    rng = np.random.default_rng(seed)
    cuts = scene_cuts(n_frames, n_scenes, rng)
    scenes = make_scenes(n_scenes, rng)
    starts = [0] + cuts
    frames, labels = [], []
    k = 0
    for i in range(n_frames):
        while k + 1 < len(starts) and i >= starts[k + 1]:
            k += 1
        frames.append(render(scenes[k], i - starts[k], size, rng))
        labels.append(frozenset({scenes[k].label}))
    return frames, labels, cuts


def write_trace(out_dir, n_frames: int, n_scenes: int, seed: int = 0, size: int = 96,
                fps: float = 30.0) -> Path:
    """Write frames, ``manifest.txt`` and ``cuts.txt``; return the manifest path."""
    frames, labels, cuts = synth_frames(n_frames, n_scenes, seed, size)
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    rel = []
    for i, f in enumerate(frames):
        name = f"frames/f{i:06d}.ppm"
        (out / name).write_bytes(encode_netpbm(f))
        rel.append(name)
    manifest = out / "manifest.txt"
    write_manifest(manifest, rel, labels, fps)
    (out / "cuts.txt").write_text("".join(f"{c}\n" for c in cuts))
    return manifest


def read_cuts(path) -> List[int]:
    return [int(line) for line in Path(path).read_text().split()]
