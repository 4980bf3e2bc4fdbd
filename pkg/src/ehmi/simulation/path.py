"""Smooth reference paths through anchor points."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import make_interp_spline


class DegenerateAnchors(ValueError):
    pass


@dataclass
class Path:
    """Interpolating spline with a dense arc-length lookup table."""

    anchors: np.ndarray
    s: np.ndarray        # arc length of each table sample
    xy: np.ndarray       # (n, 2)
    heading: np.ndarray
    curvature: np.ndarray

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def position(self, s: float) -> np.ndarray:
        return np.array([np.interp(s, self.s, self.xy[:, 0]), np.interp(s, self.s, self.xy[:, 1])])

    def heading_at(self, s: float) -> float:
        # unwrap so interpolation does not cut across +-pi
        return float(np.interp(s, self.s, self._unwrapped))

    def curvature_at(self, s: float) -> float:
        return float(np.interp(s, self.s, self.curvature))

    def __post_init__(self):
        self._unwrapped = np.unwrap(self.heading)

    def project(self, point: Sequence[float], hint: Optional[int] = None, window: int = 400) -> Tuple[float, int]:
        """Arc length of the closest table sample (searching near ``hint`` if given)."""
        p = np.asarray(point, dtype=float)
        if hint is None:
            lo, hi = 0, len(self.s)
        else:
            lo, hi = max(hint - window, 0), min(hint + window, len(self.s))
        d2 = np.sum((self.xy[lo:hi] - p) ** 2, axis=1)
        k = lo + int(np.argmin(d2))
        # refine on the neighbouring segment
        best_s = self.s[k]
        best_d = d2[k - lo]
        for j in (k - 1, k):
            if 0 <= j < len(self.s) - 1:
                a, b = self.xy[j], self.xy[j + 1]
                seg = b - a
                L2 = seg @ seg
                if L2 == 0:
                    continue
                f = np.clip((p - a) @ seg / L2, 0.0, 1.0)
                q = a + f * seg
                dq = np.sum((q - p) ** 2)
                if dq < best_d:
                    best_d, best_s = dq, self.s[j] + f * np.sqrt(L2)
        return float(best_s), k

    def lateral_error(self, point: Sequence[float], s: float) -> float:
        """Signed offset of ``point`` from the path at ``s`` (positive to the left)."""
        ref = self.position(s)
        th = self.heading_at(s)
        d = np.asarray(point, float) - ref
        return float(-np.sin(th) * d[0] + np.cos(th) * d[1])


def _unit(angle: float) -> np.ndarray:
    return np.array([np.cos(angle), np.sin(angle)])


def fit_path(start: Sequence[float], conflict_point: Optional[Sequence[float]], end: Sequence[float],
             intermediate_anchors: Sequence[Sequence[float]] = (), *, start_heading: Optional[float] = None,
             end_heading: Optional[float] = None, degree: int = 3, resolution: float = 0.05,
             min_spacing: float = 1e-3) -> Path:
    """Spline through ``start``, the intermediate anchors, ``end``.

    ``conflict_point`` is inserted among the anchors in order of chord
    distance from ``start`` when it is not already one of them. Ends are
    clamped to the given headings (radians), natural otherwise. The spline is
    parameterised by cumulative chord length, so the clamped end tangents are
    unit vectors.
    """
    pts = [np.asarray(start, float)] + [np.asarray(p, float) for p in intermediate_anchors] + [np.asarray(end, float)]
    if conflict_point is not None:
        cp = np.asarray(conflict_point, float)
        if not any(np.allclose(cp, p, atol=1e-9) for p in pts):
            mids = pts[1:-1] + [cp]
            mids.sort(key=lambda p: _chord_position(pts, p))
            pts = [pts[0]] + mids + [pts[-1]]
    anchors = np.vstack(pts)
    gaps = np.hypot(*np.diff(anchors, axis=0).T)
    if np.any(gaps < min_spacing):
        raise DegenerateAnchors(f"anchors closer than {min_spacing} m: gaps {gaps.round(6).tolist()}")
    u = np.concatenate([[0.0], np.cumsum(gaps)])
    k = min(degree, len(anchors) - 1)
    if k >= 3:
        left = [(1, _unit(start_heading))] if start_heading is not None else [(2, np.zeros(2))]
        right = [(1, _unit(end_heading))] if end_heading is not None else [(2, np.zeros(2))]
        spl = make_interp_spline(u, anchors, k=3, bc_type=(left, right))
    else:
        spl = make_interp_spline(u, anchors, k=k)
    n = max(int(np.ceil(u[-1] / resolution)) + 1, 2)
    uu = np.linspace(0.0, u[-1], n)
    xy = spl(uu)
    d1 = spl.derivative(1)(uu)
    d2 = spl.derivative(2)(uu) if k >= 2 else np.zeros_like(d1)
    seg = np.hypot(*np.diff(xy, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    heading = np.arctan2(d1[:, 1], d1[:, 0])
    speed = np.hypot(d1[:, 0], d1[:, 1])
    curvature = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / np.maximum(speed, 1e-12) ** 3
    return Path(anchors, s, xy, heading, curvature)


def _chord_position(pts, p) -> float:
    """Chord distance along the anchor polyline of the nearest point to ``p``."""
    poly = np.vstack(pts)
    best, acc = (np.inf, 0.0), 0.0
    for a, b in zip(poly[:-1], poly[1:]):
        seg = b - a
        L = np.hypot(*seg)
        f = np.clip((p - a) @ seg / (L * L), 0, 1) if L > 0 else 0.0
        d = np.hypot(*(a + f * seg - p))
        if d < best[0]:
            best = (d, acc + f * L)
        acc += L
    return best[1]
