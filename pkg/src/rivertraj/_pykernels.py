"""Numpy implementations of the geometry kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the compiled kernels are tested against.
"""

import numpy as np


def cog_diff(c1, c2):
    d = np.mod(np.asarray(c2, dtype=np.float64) - np.asarray(c1, dtype=np.float64), 360.0)
    # np.mod can round up to exactly 360.0 for tiny negative inputs
    d = np.where(d >= 360.0, 0.0, d)
    return np.where(d > 180.0, d - 360.0, d)


def bearings(dx, dy):
    b = np.mod(np.degrees(np.arctan2(dx, dy)), 360.0)
    return np.where(b >= 360.0, 0.0, b)


def steps_batch(positions):
    """Motion steps for a batch of position sequences.

    Args:
        positions: ``(B, K, 2)`` array, K >= 3.

    Returns:
        ``(seed_cog, distance, cog_change)`` with shapes ``(B,)``, ``(B, K-1)``,
        ``(B, K-1)``. The final course change of each row is 0.
    """
    pos = np.ascontiguousarray(positions, dtype=np.float64)
    delta = np.diff(pos, axis=1)
    dist = np.hypot(delta[..., 0], delta[..., 1])
    courses = bearings(delta[..., 0], delta[..., 1])
    change = np.zeros_like(dist)
    change[:, :-1] = cog_diff(courses[:, :-1], courses[:, 1:])
    return courses[:, 0].copy(), dist, change


def reconstruct_batch(seed_pos, seed_cog, distance, cog_change):
    """Dead-reckon positions from a seed pose and motion steps.

    Returns a ``(B, K, 2)`` array holding the positions after each step. The
    final course change of each row is ignored.
    """
    seed_pos = np.asarray(seed_pos, dtype=np.float64)
    distance = np.asarray(distance, dtype=np.float64)
    cog_change = np.asarray(cog_change, dtype=np.float64)
    b, k = distance.shape
    headings = np.empty((b, k))
    headings[:, 0] = np.mod(np.asarray(seed_cog, dtype=np.float64), 360.0)
    # sequential wrap keeps the running sum identical to the compiled loop
    for t in range(1, k):
        headings[:, t] = np.mod(headings[:, t - 1] + cog_change[:, t - 1], 360.0)
    rad = np.radians(headings)
    out = np.empty((b, k, 2))
    out[..., 0] = seed_pos[:, None, 0] + np.cumsum(distance * np.sin(rad), axis=1)
    out[..., 1] = seed_pos[:, None, 1] + np.cumsum(distance * np.cos(rad), axis=1)
    return out


def project_to_polyline(points, vertices, chunk=256):
    """Closest point on a polyline for every query point.

    Returns ``(segment, fraction, distance)``: segment index i means the
    closest point lies on ``vertices[i] -> vertices[i+1]`` at ``fraction``
    in ``[0, 1]``. Ties resolve to the lowest segment index.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    v = np.asarray(vertices, dtype=np.float64)
    a = v[:-1]
    ab = v[1:] - a
    len2 = np.einsum("ij,ij->i", ab, ab)
    seg = np.empty(len(pts), dtype=np.int64)
    frac = np.empty(len(pts))
    dist = np.empty(len(pts))
    for start in range(0, len(pts), chunk):
        p = pts[start:start + chunk]
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", ap, ab) / len2, 0.0, 1.0)
        rx = ap[..., 0] - t * ab[:, 0]
        ry = ap[..., 1] - t * ab[:, 1]
        d2 = rx * rx + ry * ry
        best = np.argmin(d2, axis=1)
        rows = np.arange(len(p))
        seg[start:start + chunk] = best
        frac[start:start + chunk] = t[rows, best]
        dist[start:start + chunk] = np.sqrt(d2[rows, best])
    return seg, frac, dist
