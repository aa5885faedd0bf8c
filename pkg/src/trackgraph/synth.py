"""Deterministic synthetic sequences: scripted linear motion plus optional
detector noise, with per-object feature archetypes that stay constant over
time so appearance scoring has something real to grab onto."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .core import BoundingBox, Detection, FeatureBundle
from .io_formats import SequenceBundle, assemble_sequence
from .metrics import GtEntry

_TOP_KEYS = {"name", "frame_count", "frame_width", "frame_height", "objects", "noise", "features"}
_OBJECT_KEYS = {"start_center", "velocity", "size", "start_frame", "end_frame", "dropout", "archetype"}
_NOISE_KEYS = {"jitter_sigma", "spurious_rate"}
_FEATURE_KEYS = {"families", "hist_bins", "descriptors_per_object", "descriptor_dim", "deep_dim"}
_FAMILIES = {"histogram", "descriptors", "deep"}


def _require(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def _pair(value, what: str) -> tuple[float, float]:
    _require(
        isinstance(value, (list, tuple)) and len(value) == 2
        and all(isinstance(v, (int, float)) for v in value),
        f"{what} must be a pair of numbers",
    )
    return float(value[0]), float(value[1])


class _ObjectScript:
    def __init__(self, spec: dict, index: int, frame_count: int):
        where = f"objects[{index}]"
        _require(isinstance(spec, dict), f"{where} must be an object")
        unknown = set(spec) - _OBJECT_KEYS
        _require(not unknown, f"{where} has unknown keys {sorted(unknown)}")
        self.start_center = _pair(spec.get("start_center"), f"{where}.start_center")
        self.velocity = _pair(spec.get("velocity", [0, 0]), f"{where}.velocity")
        self.size = _pair(spec.get("size"), f"{where}.size")
        _require(self.size[0] > 0 and self.size[1] > 0, f"{where}.size must be positive")
        self.start_frame = int(spec.get("start_frame", 1))
        self.end_frame = int(spec.get("end_frame", frame_count))
        _require(
            1 <= self.start_frame <= self.end_frame,
            f"{where}: need 1 <= start_frame <= end_frame",
        )
        self.archetype = int(spec.get("archetype", index))
        _require(self.archetype >= 0, f"{where}.archetype must be >= 0")
        self.dropout: list[tuple[int, int]] = []
        for k, span in enumerate(spec.get("dropout", [])):
            _require(
                isinstance(span, (list, tuple)) and len(span) == 2,
                f"{where}.dropout[{k}] must be a [first, last] pair",
            )
            a, b = int(span[0]), int(span[1])
            _require(a <= b, f"{where}.dropout[{k}]: first frame exceeds last")
            self.dropout.append((a, b))
        self.gt_id = index + 1

    def present(self, frame: int) -> bool:
        return self.start_frame <= frame <= self.end_frame

    def dropped(self, frame: int) -> bool:
        return any(a <= frame <= b for a, b in self.dropout)

    def center_at(self, frame: int) -> tuple[float, float]:
        steps = frame - self.start_frame
        return (
            self.start_center[0] + self.velocity[0] * steps,
            self.start_center[1] + self.velocity[1] * steps,
        )


class _FeatureFactory:
    """Per-archetype constant features, drawn once from the seeded generator."""

    def __init__(self, spec: dict, n_archetypes: int, rng: np.random.Generator):
        unknown = set(spec) - _FEATURE_KEYS
        _require(not unknown, f"features has unknown keys {sorted(unknown)}")
        families = spec.get("families", ["histogram", "descriptors"])
        _require(
            isinstance(families, list) and set(families) <= _FAMILIES,
            f"features.families must be a subset of {sorted(_FAMILIES)}",
        )
        self.families = set(families)
        self.hist_bins = int(spec.get("hist_bins", 8))
        self.n_desc = int(spec.get("descriptors_per_object", 6))
        self.desc_dim = int(spec.get("descriptor_dim", 16))
        self.deep_dim = int(spec.get("deep_dim", 32))
        _require(self.hist_bins >= 1, "features.hist_bins must be >= 1")
        _require(self.n_desc >= 2, "features.descriptors_per_object must be >= 2")
        _require(self.desc_dim >= 1 and self.deep_dim >= 1, "feature dims must be >= 1")
        self._rng = rng

        n = max(1, n_archetypes)
        self._hist = np.zeros((n, self.hist_bins))
        for i in range(n):
            self._hist[i, i % self.hist_bins] = 100.0
        centers = rng.normal(0.0, 50.0, size=(n, self.desc_dim))
        self._desc = centers[:, None, :] + rng.normal(0.0, 1.0, size=(n, self.n_desc, self.desc_dim))
        self._deep = rng.normal(0.0, 1.0, size=(n, self.deep_dim))

    def for_archetype(self, i: int) -> FeatureBundle:
        i = i % self._hist.shape[0]
        return self._build(self._hist[i], self._desc[i], self._deep[i])

    def spurious(self) -> FeatureBundle:
        rng = self._rng
        return self._build(
            rng.uniform(0.0, 50.0, self.hist_bins),
            rng.normal(0.0, 50.0, size=(self.n_desc, self.desc_dim)),
            rng.normal(0.0, 1.0, self.deep_dim),
        )

    def _build(self, hist, desc, deep) -> FeatureBundle:
        return FeatureBundle(
            histogram=hist.copy() if "histogram" in self.families else None,
            descriptors=desc.copy() if "descriptors" in self.families else None,
            deep_vector=deep.copy() if "deep" in self.families else None,
        )


def _clip_box(cx: float, cy: float, w: float, h: float, fw: float, fh: float) -> Optional[BoundingBox]:
    x0 = max(cx - w / 2.0, 0.0)
    y0 = max(cy - h / 2.0, 0.0)
    x1 = min(cx + w / 2.0, fw)
    y1 = min(cy + h / 2.0, fh)
    if x1 - x0 < 1.0 or y1 - y0 < 1.0:
        return None
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def generate_sequence(scenario: dict, seed: int) -> SequenceBundle:
    """Expand a scenario description into a full SequenceBundle.

    Objects move linearly from start_center at velocity px/frame between
    start_frame and end_frame; boxes are clipped to the frame and disappear
    from ground truth once less than a pixel remains visible. Dropout spans
    suppress the detection but keep the ground truth, modelling occlusion.
    """
    _require(isinstance(scenario, dict), "scenario must be a JSON object")
    unknown = set(scenario) - _TOP_KEYS
    _require(not unknown, f"scenario has unknown keys {sorted(unknown)}")
    name = str(scenario.get("name", "scenario"))
    frame_count = int(scenario.get("frame_count", 0))
    _require(frame_count >= 1, "frame_count must be >= 1")
    fw = float(scenario.get("frame_width", 960.0))
    fh = float(scenario.get("frame_height", 540.0))
    _require(fw > 0 and fh > 0, "frame dimensions must be positive")

    noise = scenario.get("noise", {})
    _require(isinstance(noise, dict), "noise must be an object")
    unknown = set(noise) - _NOISE_KEYS
    _require(not unknown, f"noise has unknown keys {sorted(unknown)}")
    jitter = float(noise.get("jitter_sigma", 0.0))
    spurious_rate = float(noise.get("spurious_rate", 0.0))
    _require(jitter >= 0 and spurious_rate >= 0, "noise values must be >= 0")

    raw_objects = scenario.get("objects", [])
    _require(isinstance(raw_objects, list), "objects must be a list")
    objects = [_ObjectScript(o, i, frame_count) for i, o in enumerate(raw_objects)]

    rng = np.random.default_rng(seed)
    n_arch = max((o.archetype for o in objects), default=0) + 1
    factory = _FeatureFactory(scenario.get("features", {}), n_arch, rng)

    detections: dict[int, list[Detection]] = {}
    features: dict[tuple[int, int], FeatureBundle] = {}
    gt: list[GtEntry] = []

    for frame in range(1, frame_count + 1):
        dets: list[Detection] = []

        def add_detection(box: BoundingBox, conf: float, bundle: FeatureBundle):
            det = Detection(frame, len(dets), box, conf)
            dets.append(det)
            features[(frame, det.det_index)] = bundle

        for obj in objects:
            if not obj.present(frame):
                continue
            cx, cy = obj.center_at(frame)
            box = _clip_box(cx, cy, obj.size[0], obj.size[1], fw, fh)
            if box is None:
                continue
            gt.append(GtEntry(frame, obj.gt_id, box))
            if obj.dropped(frame):
                continue
            if jitter > 0:
                dx, dy = rng.normal(0.0, jitter, 2)
                x = min(max(box.x + dx, 0.0), fw - box.w)
                y = min(max(box.y + dy, 0.0), fh - box.h)
                box = BoundingBox(x, y, box.w, box.h)
            add_detection(box, 1.0, factory.for_archetype(obj.archetype))

        if spurious_rate > 0:
            for _ in range(rng.poisson(spurious_rate)):
                w = rng.uniform(20.0, 60.0)
                h = rng.uniform(15.0, 40.0)
                x = rng.uniform(0.0, max(fw - w, 1.0))
                y = rng.uniform(0.0, max(fh - h, 1.0))
                add_detection(BoundingBox(x, y, w, h), 0.5, factory.spurious())

        if dets:
            detections[frame] = dets

    return assemble_sequence(
        name, detections, features, gt, frame_width=fw, frame_height=fh, frame_count=frame_count
    )
