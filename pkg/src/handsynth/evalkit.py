"""Desk-scale dataset verification.

Rendered depth recordings are reduced to 3D hand trajectories (foreground
centroid per labeled frame, back-projected through the pinhole model) and
compared with dynamic time warping: a 1-NN leave-one-out pass checks that
the generated classes are geometrically separable, and the variance
ablation checks that Low / Median / High range conditions order intra-class
dispersion the way the range widths say they should.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .config import RangeCondition, VariationConfig, ParamRange
from .render import decode_depth16
from .scene import CameraSpec, SensorParams, backproject_pixels

FOREGROUND_MARGIN_CM = 5.0  # hand must sit this far in front of the background
HAND_EXTENT_CM = 14.0  # depth slab kept behind the nearest foreground pixel
MIN_FOREGROUND_PIXELS = 50


@dataclass(frozen=True)
class Trajectory:
    """Per-frame 3D centroid of foreground depth pixels over the label span."""

    points: np.ndarray  # (n, 3) cm, world frame
    confidence: float  # fraction of frames with enough foreground pixels

    def __len__(self) -> int:
        return len(self.points)


def extract_trajectory(
    frames: Sequence[np.ndarray],
    cam: CameraSpec,
    sensor: SensorParams,
    label_span: tuple[int, int],
) -> Trajectory:
    """Hand trajectory from 16-bit depth frames of one recording.

    The first frame (hand still at rest) provides the per-pixel
    environment depth floor; foreground pixels at later frames are valid
    samples at least FOREGROUND_MARGIN_CM in front of it.  Of those, only
    the front HAND_EXTENT_CM depth slab enters the centroid, so the
    trailing forearm does not wash out the hand motion.  Frames with too
    few foreground pixels reuse the neighboring centroid.
    """
    if not len(frames):
        raise ValueError("no frames")
    background = decode_depth16(np.asarray(frames[0]), sensor)
    bg_valid = np.isfinite(background)
    if not np.any(bg_valid):
        raise ValueError("first frame has no valid depth to estimate the background floor")

    first, last = label_span
    if not (0 <= first <= last < len(frames)):
        raise ValueError(f"label span {label_span} outside 0..{len(frames) - 1}")

    centroids: list[np.ndarray | None] = []
    good = 0
    for idx in range(first, last + 1):
        depth = decode_depth16(np.asarray(frames[idx]), sensor)
        fg = bg_valid & np.isfinite(depth) & (depth < background - FOREGROUND_MARGIN_CM)
        if np.any(fg):
            fg &= depth < float(depth[fg].min()) + HAND_EXTENT_CM
        count = int(np.count_nonzero(fg))
        if count >= MIN_FOREGROUND_PIXELS:
            vs, us = np.nonzero(fg)
            pts = backproject_pixels(cam, us.astype(np.float64), vs.astype(np.float64), depth[fg])
            centroids.append(pts.mean(axis=0))
            good += 1
        else:
            centroids.append(None)

    if good == 0:
        raise ValueError("zero foreground pixels across all labeled frames")
    # fill gaps: reuse the previous centroid, backfill leading gaps
    for i in range(len(centroids)):
        if centroids[i] is None and i > 0:
            centroids[i] = centroids[i - 1]
    for i in range(len(centroids) - 1, -1, -1):
        if centroids[i] is None:
            centroids[i] = centroids[i + 1]
    points = np.vstack(centroids)
    if not np.all(np.isfinite(points)):
        raise ValueError("non-finite trajectory coordinates")
    return Trajectory(points=points, confidence=good / len(centroids))


# ---------------------------------------------------------------------------
# dynamic time warping
# ---------------------------------------------------------------------------


def dtw_distance(a: Trajectory | np.ndarray, b: Trajectory | np.ndarray) -> float:
    """Classic DTW with Euclidean point cost, full window, symmetric
    match/insert/delete steps and aligned boundaries.

    Evaluated over anti-diagonals so the O(n*m) table fills with numpy
    vector ops; distances are exactly the textbook recurrence's.
    """
    pa = a.points if isinstance(a, Trajectory) else np.asarray(a, dtype=np.float64)
    pb = b.points if isinstance(b, Trajectory) else np.asarray(b, dtype=np.float64)
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("trajectories must be non-empty")
    if pa.ndim == 1:
        pa = pa[:, None]
    if pb.ndim == 1:
        pb = pb[:, None]
    n, m = len(pa), len(pb)
    cost = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2))

    inf = np.inf
    prev2 = np.full(n, inf)  # diagonal k-2, indexed by i
    prev = np.full(n, inf)  # diagonal k-1
    for k in range(n + m - 1):
        i_lo = max(0, k - m + 1)
        i_hi = min(n - 1, k)
        idx = np.arange(i_lo, i_hi + 1)
        c = cost[idx, k - idx]
        up = np.where(idx >= 1, prev[np.maximum(idx - 1, 0)], inf)
        left = np.where(k - idx >= 1, prev[idx], inf)
        diag = np.where((idx >= 1) & (k - idx >= 1), prev2[np.maximum(idx - 1, 0)], inf)
        best = np.minimum(np.minimum(up, left), diag)
        if k == 0:
            best = np.array([0.0])
        cur = np.full(n, inf)
        cur[idx] = c + best
        prev2, prev = prev, cur
    return float(prev[n - 1])


class TrajectoryRecord(NamedTuple):
    trajectory: Trajectory
    label: str
    variant_index: int = 0


def classify_1nn(dataset: Sequence[TrajectoryRecord], query: Trajectory) -> str:
    """Label of the nearest dataset trajectory; ties resolve to the lowest
    (gesture label, variant index)."""
    if not dataset:
        raise ValueError("empty dataset")
    ordered = sorted(dataset, key=lambda r: (r.label, r.variant_index))
    best_label = ordered[0].label
    best_dist = np.inf
    for record in ordered:
        d = dtw_distance(record.trajectory, query)
        if d < best_dist:
            best_dist = d
            best_label = record.label
    return best_label


def leave_one_out_accuracy(dataset: Sequence[TrajectoryRecord]) -> dict:
    """1-NN leave-one-out over the whole set; returns accuracy + confusion."""
    if len(dataset) < 2:
        raise ValueError("need at least 2 records")
    labels = sorted({r.label for r in dataset})
    confusion = {a: {b: 0 for b in labels} for a in labels}
    correct = 0
    for i, record in enumerate(dataset):
        rest = [r for j, r in enumerate(dataset) if j != i]
        predicted = classify_1nn(rest, record.trajectory)
        confusion[record.label][predicted] += 1
        if predicted == record.label:
            correct += 1
    return {
        "accuracy": correct / len(dataset),
        "n_records": len(dataset),
        "confusion": confusion,
    }


def mean_pairwise_dispersion(trajectories: Sequence[Trajectory]) -> float:
    """Mean DTW distance over all unordered pairs."""
    n = len(trajectories)
    if n < 2:
        raise ValueError("need at least 2 trajectories")
    total = 0.0
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += dtw_distance(trajectories[i], trajectories[j])
            count += 1
    return total / count


# ---------------------------------------------------------------------------
# variance ablation
# ---------------------------------------------------------------------------

# Ablation protocol: the examined parameter gets a wide, measurable median
# range while the non-examined gesture parameters keep tight medians, so
# halving / doubling the examined range is what moves the dispersion
# instead of drowning in the co-varied background.  Speed and position run
# on a dynamic swipe; finger spacing runs on the static peace sign where
# trajectory length does not confound the finger geometry signal.
ABLATION_PARAMS = ("speed_offset", "position_offset", "finger_spacing")

_TIGHT = {
    "speed_offset": ParamRange(0.0, 10.0),
    "position_offset": ParamRange(-0.1, 0.1),
    "finger_spacing": ParamRange(-2.0, 2.0),
    "finger_rotation": ParamRange(-0.25, 0.25),
    "hand_orientation": ParamRange(-0.25, 0.25),
    "chromaticity_coeff": ParamRange(1.0, 1.0),
    "depth_min": ParamRange(20.0, 20.0),
    "depth_max": ParamRange(150.0, 150.0),
}

_EXAMINED = {
    "speed_offset": ParamRange(0.0, 50.0),
    "position_offset": ParamRange(-2.0, 2.0),
    "finger_spacing": ParamRange(-14.0, 14.0),
}

_ABLATION_GESTURE = {
    "speed_offset": "swipe_right",
    "position_offset": "swipe_right",
    "finger_spacing": "peace_sign",
}


def ablation_protocol_config(param: str) -> tuple[VariationConfig, str]:
    """(variation config, gesture name) for one examined parameter."""
    if param not in ABLATION_PARAMS:
        raise ValueError(f"ablation covers {ABLATION_PARAMS}, not {param!r}")
    medians = dict(_TIGHT)
    medians[param] = _EXAMINED[param]
    return VariationConfig(**medians), _ABLATION_GESTURE[param]


def run_variance_ablation(
    n_variants: int = 20,
    params: Iterable[str] = ABLATION_PARAMS,
    master_seed: int = 0,
    resolution: tuple[int, int] = (320, 240),
    fps: float = 30.0,
) -> dict:
    """Dispersion per range condition for each examined parameter.

    For each parameter only its condition is scaled Low/Median/High; all
    other parameters keep sampling their (protocol) median ranges.
    Recordings render in memory with sensor noise disabled and reduce to
    trajectories before the pairwise DTW dispersion is taken.
    """
    from .pipeline import render_trajectory_set  # lazy: pipeline imports evalkit

    report: dict = {"n_variants": n_variants, "parameters": {}}
    for param in params:
        cfg, gesture_name = ablation_protocol_config(param)
        per_condition = {}
        for cond in (RangeCondition.LOW, RangeCondition.MEDIAN, RangeCondition.HIGH):
            trajectories = render_trajectory_set(
                gesture_name=gesture_name,
                variation=cfg,
                conditions={param: cond},
                n_variants=n_variants,
                master_seed=master_seed,
                resolution=resolution,
                fps=fps,
                noise_enabled=False,
            )
            per_condition[cond.value] = mean_pairwise_dispersion(trajectories)
        low, median, high = (
            per_condition["low"],
            per_condition["median"],
            per_condition["high"],
        )
        report["parameters"][param] = {
            "gesture": gesture_name,
            "dispersion": per_condition,
            "low_to_median_ratio": median / low if low > 0 else float("inf"),
            "median_to_high_ratio": high / median if median > 0 else float("inf"),
            "ordered": low < median < high,
        }
    return report
