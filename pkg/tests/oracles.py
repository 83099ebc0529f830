"""Independent brute-force oracles used to freeze expected values.

Everything here is written against the mathematical definitions only and
never calls into the library
code paths it is used to check.
"""
from __future__ import annotations

import itertools

import numpy as np


def brute_knn(query, reference, k):
    """O(Q*R) nearest neighbours via per-pair loops and a stable sort."""
    q = np.asarray(query, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    idx = np.zeros((len(q), k), dtype=np.int64)
    dist = np.zeros((len(q), k))
    for i, p in enumerate(q):
        d = [float(np.sqrt(((p - rr) ** 2).sum())) for rr in r]
        order = sorted(range(len(r)), key=lambda j: (d[j], j))[:k]
        idx[i] = order
        dist[i] = [d[j] for j in order]
    return idx, dist


def brute_chamfer(a, b):
    """Nested-loop Chamfer-L2."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    fwd = sum(min(float(((x - y) ** 2).sum()) for y in b) for x in a) / len(a)
    bwd = sum(min(float(((y - x) ** 2).sum()) for x in a) for y in b) / len(b)
    return fwd + bwd


def best_two_subset_containing(points, anchor):
    """Exhaustive max-min-distance 2-subset that includes ``anchor``."""
    pts = np.asarray(points, dtype=np.float64)
    best, best_d = None, -1.0
    for pair in itertools.combinations(range(len(pts)), 2):
        if anchor not in pair:
            continue
        d = float(np.linalg.norm(pts[pair[0]] - pts[pair[1]]))
        if d > best_d:
            best, best_d = set(pair), d
    return best


def plane_barycentric_hit(origin, direction, tri):
    """Ray/triangle distance via plane intersection then barycentric test."""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    tri = np.asarray(tri, dtype=np.float64)
    n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    denom = float(n @ d)
    if abs(denom) < 1e-12:
        return None
    t = float(n @ (tri[0] - o)) / denom
    if t <= 1e-12:
        return None
    p = o + t * d
    # barycentric coordinates from the 2x2 system
    v0, v1, v2 = tri[1] - tri[0], tri[2] - tri[0], p - tri[0]
    d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
    d20, d21 = v2 @ v0, v2 @ v1
    den = d00 * d11 - d01 * d01
    if abs(den) < 1e-18:
        return None
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    if v < -1e-12 or w < -1e-12 or v + w > 1 + 1e-12:
        return None
    return t


def finite_difference_grad(f, x, h=1e-5):
    """Central finite differences of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b, floor=1.0):
    """Gradient-check error: |a-b| / max(|a|, |b|, floor) elementwise max."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
