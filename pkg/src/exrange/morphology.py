"""Exact Euclidean distance transforms and binary erosion/dilation.

Distances are measured between pixel centers: the distance value of a true
pixel is the exact Euclidean distance to the nearest false pixel center,
computed as the square root of an exactly-accumulated integer squared
distance. Erosion keeps a pixel iff its distance value strictly exceeds the
radius, so the cardinality identity

    #{distance > r} == #erode(mask, r)

holds exactly for every radius, which downstream CDF estimation relies on.

The transform is the separable lower-envelope algorithm over squared
distances (a row pass followed by a column-wise envelope pass), vectorized
across all columns at once. Work is O(nx*ny) amortized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RangeField:
    """Distance, in physical units, from each pixel center to the nearest
    non-exceedance pixel center. Zero exactly on non-exceedance pixels."""

    r: np.ndarray          # (ny, nx) float64
    dx: float
    p: float | None = None
    t_index: int | None = None
    policy: str | None = None

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.float64)
        if r.ndim != 2:
            raise ValueError(f"range field must be 2-d, got shape {r.shape}")
        object.__setattr__(self, "r", r)


def _row_nearest_false_sq(mask: np.ndarray, inf: int) -> np.ndarray:
    """Squared distance along each row to the nearest False pixel.

    Returns int64; rows without any False pixel get inf**2.
    """
    ny, nx = mask.shape
    jj = np.arange(nx, dtype=np.int64)
    false_j = np.where(~mask, jj, -1)
    left = np.maximum.accumulate(false_j, axis=1)
    dl = np.where(left >= 0, jj - left, inf)
    false_jr = np.where(~mask[:, ::-1], jj, -1)
    right = np.maximum.accumulate(false_jr, axis=1)
    dr = np.where(right >= 0, jj - right, inf)[:, ::-1]
    g = np.minimum(dl, dr)
    return g * g


def _envelope_pass_sq(f: np.ndarray) -> np.ndarray:
    """out[i, j] = min_k f[k, j] + (i - k)^2, exactly, for integer f >= 0.

    Lower envelope of parabolas per column, all columns processed in
    lockstep. Parabola intersections are evaluated in float64; since all
    candidate outputs are integers well below 2**53, ties broken by float
    roundoff cannot change the integer minimum.
    """
    n, m = f.shape
    cols = np.arange(m)
    v = np.zeros((n, m), dtype=np.int64)       # vertex row of each stacked parabola
    z = np.full((n + 1, m), -np.inf)           # left boundary of each parabola's reign
    z[1, :] = np.inf
    k = np.zeros(m, dtype=np.int64)            # stack top per column
    qq = np.arange(n, dtype=np.int64)
    fq_all = f + (qq * qq)[:, None]
    for q in range(1, n):
        fq = fq_all[q]
        while True:
            vk = v[k, cols]
            s = (fq - (f[vk, cols] + vk * vk)) / (2.0 * (q - vk))
            pop = (s <= z[k, cols]) & (k > 0)
            if not pop.any():
                break
            k[pop] -= 1
        k += 1
        v[k, cols] = q
        z[k, cols] = s
        z[np.minimum(k + 1, n), cols] = np.inf
    out = np.empty((n, m), dtype=np.int64)
    k[:] = 0
    for q in range(n):
        while True:
            adv = z[k + 1, cols] < q
            if not adv.any():
                break
            k[adv] += 1
        vq = v[k, cols]
        out[q] = (q - vq) ** 2 + f[vq, cols]
    return out


def distance_transform_squared(mask: np.ndarray, edge_is_false: bool = False) -> np.ndarray:
    """Exact integer squared pixel distance to the nearest False pixel.

    With ``edge_is_false`` the grid is treated as surrounded by a virtual
    ring of False pixels, so distances are additionally capped by the
    distance to just outside the grid. Without it, a mask containing no
    False pixel is an error (the distance is undefined).
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-d, got shape {mask.shape}")
    if edge_is_false:
        padded = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), dtype=bool)
        padded[1:-1, 1:-1] = mask
        return distance_transform_squared(padded, edge_is_false=False)[1:-1, 1:-1]
    if mask.all():
        raise ValueError(
            "mask has no False pixel; distance is undefined "
            "(pass edge_is_false=True to measure distance to the grid edge)"
        )
    ny, nx = mask.shape
    inf = ny + nx + 1
    g2 = _row_nearest_false_sq(mask, inf)
    return _envelope_pass_sq(g2)


def distance_transform(mask: np.ndarray, dx: float = 1.0,
                       edge_is_false: bool = False) -> RangeField:
    """Exact Euclidean distance transform in physical units (pixel centers)."""
    if not dx > 0:
        raise ValueError(f"dx must be positive, got {dx}")
    d2 = distance_transform_squared(mask, edge_is_false=edge_is_false)
    return RangeField(r=dx * np.sqrt(d2.astype(np.float64)), dx=dx)


def erode(mask: np.ndarray, radius: float, dx: float = 1.0,
          edge_is_false: bool = False) -> np.ndarray:
    """Binary erosion by a disk of the given physical radius.

    A pixel survives iff every pixel center within the radius is true,
    equivalently iff its distance-transform value strictly exceeds the
    radius. An all-true mask erodes to itself (vacuously, no complement
    exists on the grid) unless ``edge_is_false`` caps distances at the
    grid edge.
    """
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    mask = np.asarray(mask, dtype=bool)
    if radius == 0:
        return mask.copy()
    if mask.all() and not edge_is_false:
        return mask.copy()
    if not mask.any():
        return mask.copy()
    field = distance_transform(mask, dx=dx, edge_is_false=edge_is_false)
    return field.r > radius


def dilate(mask: np.ndarray, radius: float, dx: float = 1.0) -> np.ndarray:
    """Binary dilation by a disk, via complement-erode-complement duality."""
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    mask = np.asarray(mask, dtype=bool)
    return ~erode(~mask, radius, dx=dx)
