"""Deterministic geometric and combinatorial primitives.

Pure functions over numpy arrays: farthest point sampling, radius grouping,
axis-aligned box overlap measures, and greedy box suppression. Everything
here is free of learned state and safe to call concurrently.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Box",
    "InstanceLabel",
    "BallQueryResult",
    "farthest_point_sample",
    "ball_query",
    "box_iou_3d",
    "box_giou_3d",
    "iou_matrix",
    "giou_matrix",
    "nms_3d",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned 3D box given by center and positive extents, in meters."""

    center: np.ndarray
    size: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        size = np.asarray(self.size, dtype=np.float64)
        if center.shape != (3,) or size.shape != (3,):
            raise ValueError("box center and size must be 3-vectors")
        if not (np.all(np.isfinite(center)) and np.all(np.isfinite(size))):
            raise ValueError("box parameters must be finite")
        if np.any(size <= 0):
            raise ValueError("box extents must be strictly positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)

    @property
    def min_corner(self):
        return self.center - self.size / 2.0

    @property
    def max_corner(self):
        return self.center + self.size / 2.0

    @property
    def volume(self):
        return float(np.prod(self.size))

    def contains(self, point):
        """Closed-interval membership test for a 3D point."""
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= self.min_corner) and np.all(p <= self.max_corner))

    @staticmethod
    def from_corners(min_corner, max_corner):
        min_corner = np.asarray(min_corner, dtype=np.float64)
        max_corner = np.asarray(max_corner, dtype=np.float64)
        return Box(center=(min_corner + max_corner) / 2.0, size=max_corner - min_corner)


@dataclass(frozen=True)
class InstanceLabel:
    """Ground-truth object: a box plus its semantic category."""

    box: Box
    class_id: int

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError("class_id must be non-negative")

    @property
    def center(self):
        return self.box.center


@dataclass
class BallQueryResult:
    """Per-center index groups from :func:`ball_query`.

    ``groups[i]`` holds the indices inside the ball around center ``i``,
    nearest first. ``counts[i]`` is the number of in-radius members; when it
    is forced to 1 by the empty-ball fallback, ``fallback[i]`` is set.
    """

    groups: list = field(default_factory=list)
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fallback: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def _as_points(points, name):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3)")
    if pts.shape[0] == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} must be finite")
    return pts


def farthest_point_sample(points, k, start=0):
    """Greedy max-min subsampling of a point set.

    Starting from ``points[start]``, repeatedly selects the point whose
    minimum distance to the already-selected set is largest; ties resolve to
    the lowest index. Returns the ``k`` selected indices in selection order.
    """
    pts = _as_points(points, "points")
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    if not 0 <= start < n:
        raise ValueError(f"start={start} out of range")

    selected = np.empty(k, dtype=np.int64)
    selected[0] = start
    # Squared distances preserve the argmax and the tie ordering.
    min_sq = np.sum((pts - pts[start]) ** 2, axis=1)
    for i in range(1, k):
        nxt = int(np.argmax(min_sq))
        selected[i] = nxt
        np.minimum(min_sq, np.sum((pts - pts[nxt]) ** 2, axis=1), out=min_sq)
    return selected


def ball_query(points, centers, radius, max_samples, chunk=256):
    """Groups point indices within ``radius`` of each center, nearest first.

    Each group holds at most ``max_samples`` indices. A center with no point
    in radius falls back to the single globally nearest point, flagged in
    ``fallback``; groups are never padded with duplicates.
    """
    pts = _as_points(points, "points")
    ctr = _as_points(centers, "centers")
    if radius <= 0:
        raise ValueError("radius must be positive")
    if max_samples < 1:
        raise ValueError("max_samples must be >= 1")

    m = ctr.shape[0]
    groups = []
    counts = np.zeros(m, dtype=np.int64)
    fallback = np.zeros(m, dtype=bool)
    r_sq = radius * radius
    for lo in range(0, m, chunk):
        block = ctr[lo : lo + chunk]
        # (B, N) squared distances; chunked to bound memory at scene scale.
        d_sq = np.sum((block[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        for row, d in enumerate(d_sq):
            inside = np.flatnonzero(d <= r_sq)
            i = lo + row
            if inside.size == 0:
                groups.append(np.array([int(np.argmin(d))], dtype=np.int64))
                counts[i] = 1
                fallback[i] = True
                continue
            order = np.argsort(d[inside], kind="stable")[:max_samples]
            groups.append(inside[order].astype(np.int64))
            counts[i] = groups[-1].size
    return BallQueryResult(groups=groups, counts=counts, fallback=fallback)


def _interval_overlap(lo_a, hi_a, lo_b, hi_b):
    return np.maximum(0.0, np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b))


def box_iou_3d(a: Box, b: Box) -> float:
    """Intersection over union via per-axis interval overlap."""
    inter = float(np.prod(_interval_overlap(a.min_corner, a.max_corner, b.min_corner, b.max_corner)))
    union = a.volume + b.volume - inter
    return inter / union


def box_giou_3d(a: Box, b: Box) -> float:
    """Generalized IoU: IoU minus the empty fraction of the tight enclosing box."""
    inter = float(np.prod(_interval_overlap(a.min_corner, a.max_corner, b.min_corner, b.max_corner)))
    union = a.volume + b.volume - inter
    enclosing = float(
        np.prod(np.maximum(a.max_corner, b.max_corner) - np.minimum(a.min_corner, b.min_corner))
    )
    return inter / union - (enclosing - union) / enclosing


def _split_corners(centers, sizes):
    centers = np.asarray(centers, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.float64)
    return centers - sizes / 2.0, centers + sizes / 2.0


def iou_matrix(centers_a, sizes_a, centers_b, sizes_b):
    """Pairwise IoU between two box sets, shape (len(a), len(b))."""
    lo_a, hi_a = _split_corners(centers_a, sizes_a)
    lo_b, hi_b = _split_corners(centers_b, sizes_b)
    overlap = _interval_overlap(lo_a[:, None, :], hi_a[:, None, :], lo_b[None, :, :], hi_b[None, :, :])
    inter = np.prod(overlap, axis=2)
    vol_a = np.prod(hi_a - lo_a, axis=1)
    vol_b = np.prod(hi_b - lo_b, axis=1)
    union = vol_a[:, None] + vol_b[None, :] - inter
    return inter / union


def giou_matrix(centers_a, sizes_a, centers_b, sizes_b):
    """Pairwise generalized IoU between two box sets."""
    lo_a, hi_a = _split_corners(centers_a, sizes_a)
    lo_b, hi_b = _split_corners(centers_b, sizes_b)
    overlap = _interval_overlap(lo_a[:, None, :], hi_a[:, None, :], lo_b[None, :, :], hi_b[None, :, :])
    inter = np.prod(overlap, axis=2)
    vol_a = np.prod(hi_a - lo_a, axis=1)
    vol_b = np.prod(hi_b - lo_b, axis=1)
    union = vol_a[:, None] + vol_b[None, :] - inter
    enclosing = np.prod(
        np.maximum(hi_a[:, None, :], hi_b[None, :, :]) - np.minimum(lo_a[:, None, :], lo_b[None, :, :]),
        axis=2,
    )
    return inter / union - (enclosing - union) / enclosing


def nms_3d(boxes, scores, iou_threshold):
    """Greedy non-maximum suppression by descending score.

    A box is suppressed when its IoU with an already-kept box exceeds the
    threshold. Score ties resolve to the lower index. Returns kept indices
    in descending-score order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if len(boxes) != scores.shape[0]:
        raise ValueError("boxes and scores must have the same length")
    if not 0 < iou_threshold <= 1:
        raise ValueError("iou_threshold must be in (0, 1]")
    if len(boxes) == 0:
        return []

    centers = np.stack([b.center for b in boxes])
    sizes = np.stack([b.size for b in boxes])
    ious = iou_matrix(centers, sizes, centers, sizes)
    # lexsort: primary descending score, secondary ascending index.
    order = np.lexsort((np.arange(len(boxes)), -scores))
    kept = []
    for idx in order:
        if all(ious[idx, j] <= iou_threshold for j in kept):
            kept.append(int(idx))
    return kept
