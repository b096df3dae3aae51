"""Per-pixel empirical quantile thresholds and excursion-mask extraction."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .raster import RasterStack


class BoundaryPolicy(str, enum.Enum):
    """How pixels outside the domain enter an excursion mask.

    ERODE marks them as non-exceedances, so distances get clipped at the
    domain boundary. FILL_EXCEED marks them as exceedances (the excursion
    set united with the domain complement), so distances are measured to
    the nearest in-domain non-exceedance.
    """

    ERODE = "erode"
    FILL_EXCEED = "fill-exceed"


def order_statistic_index(p: float, n: int) -> int:
    """Smallest k (1-based) with k/n >= p, i.e. the left-continuous
    inverse-ECDF order statistic. Robust to float roundoff in p*n."""
    k = int(math.ceil(p * n))
    k = min(max(k, 1), n)
    while k > 1 and (k - 1) / n >= p:
        k -= 1
    return k


@dataclass(frozen=True)
class ThresholdField:
    """Per-pixel threshold u_p(s): the empirical p-quantile of each pixel
    series. NaN outside the domain."""

    p: float
    u: np.ndarray  # (ny, nx) float32, NaN outside the domain

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must be in (0,1), got {self.p}")
        u = np.asarray(self.u, dtype=np.float32)
        if u.ndim != 2:
            raise ValueError(f"threshold grid must be 2-d, got shape {u.shape}")
        object.__setattr__(self, "u", u)


@dataclass(frozen=True)
class ExcursionMask:
    """Binary exceedance grid for one time slice under a boundary policy."""

    exceed: np.ndarray  # (ny, nx) bool
    policy: BoundaryPolicy
    p: float
    t_index: int

    def __post_init__(self):
        exceed = np.asarray(self.exceed, dtype=bool)
        if exceed.ndim != 2:
            raise ValueError(f"mask must be 2-d, got shape {exceed.shape}")
        object.__setattr__(self, "exceed", exceed)
        object.__setattr__(self, "policy", BoundaryPolicy(self.policy))


def quantile_field(stack: RasterStack, p: float) -> ThresholdField:
    """Pixelwise empirical p-quantile of the stack.

    Uses the left-continuous inverse ECDF: the ceil(p*nt)-th order
    statistic of each pixel series, with no interpolation, so the
    threshold always equals one of the observed values.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0,1), got {p}")
    if stack.nt < 2:
        raise ValueError(f"need at least 2 time slices for a quantile, got nt={stack.nt}")
    k = order_statistic_index(p, stack.nt)
    u = np.partition(stack.values, k - 1, axis=0)[k - 1]
    u = u.copy()
    u[~stack.domain().inside] = np.nan
    return ThresholdField(p=p, u=u)


def excursion_mask(stack: RasterStack, t_index: int, thr: ThresholdField,
                   policy: BoundaryPolicy | str = BoundaryPolicy.FILL_EXCEED) -> ExcursionMask:
    """Strict-exceedance mask {X(t) > u} of one slice.

    A value exactly equal to the threshold is a non-exceedance. Nodata
    pixels are filled according to the boundary policy.
    """
    policy = BoundaryPolicy(policy)
    if not 0 <= t_index < stack.nt:
        raise ValueError(f"slice index {t_index} outside [0, {stack.nt})")
    if thr.u.shape != (stack.ny, stack.nx):
        raise ValueError(
            f"threshold grid {thr.u.shape} does not match stack grid {(stack.ny, stack.nx)}"
        )
    inside = stack.domain().inside
    with np.errstate(invalid="ignore"):
        exceed = stack.values[t_index] > thr.u
    if policy is BoundaryPolicy.FILL_EXCEED:
        exceed = exceed | ~inside
    else:
        exceed = exceed & inside
    return ExcursionMask(exceed=exceed, policy=policy, p=thr.p, t_index=t_index)
