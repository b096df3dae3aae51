"""Tail decay rate estimation and median-extremal-range regression.

The two-level estimator ``theta_hat`` turns a pair of pooled medians into
the local slope of log median against log(-log(1-p)). The regression
model

    log R = beta_s - theta_s * log(-log(1-p)) + error

is fitted either per pixel by exact least-absolute-deviation (candidate
lines enumerated through sample pairs, so the estimator has no optimizer
nondeterminism) or jointly over space with tensor-product cubic B-spline
surfaces for both coefficients, minimizing a median pinball loss smoothed
quadratically inside a kappa band plus a squared-difference roughness
penalty on each coefficient grid. The smoothing width is annealed over
three equal-length stages and each stage descends by reweighted penalized
least squares with a fixed iteration budget, so a fit is a pure function
of its inputs.

Uncertainty comes from a delete-one-block jackknife that reruns the whole
estimation chain per block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.interpolate import BSpline

from .errors import DegenerateFitError
from .raster import DomainMask, RasterStack


def loglog_level(p: float) -> float:
    """The regression covariate log(-log(1-p))."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0,1), got {p}")
    return math.log(-math.log(1.0 - p))


def theta_hat(m1: float, m2: float, p1: float, p2: float) -> float:
    """Two-level tail decay rate from pooled medians m1 at p1 and m2 at p2.

    Zero medians (no positive range observations) give 0 by convention.
    """
    x1 = loglog_level(p1)
    x2 = loglog_level(p2)
    if p1 == p2:
        raise ValueError("the two probability levels must differ")
    if m1 == 0.0 or m2 == 0.0:
        return 0.0
    if m1 < 0 or m2 < 0:
        raise ValueError("medians must be non-negative")
    return (math.log(m2) - math.log(m1)) / (x1 - x2)


@dataclass(frozen=True)
class RangeSamples:
    """Flat sample arrays for the regression: one entry per positive range
    observation (pixel, slice, level)."""

    pixel_y: np.ndarray   # int, row index
    pixel_x: np.ndarray   # int, column index
    x: np.ndarray         # log(-log(1-p))
    y: np.ndarray         # log range (physical units)
    block: np.ndarray     # block id of the originating slice

    def __post_init__(self):
        n = self.y.shape[0]
        for name in ("pixel_y", "pixel_x", "x", "block"):
            if getattr(self, name).shape != (n,):
                raise ValueError("sample arrays must share one length")
        if not np.isfinite(self.x).all() or not np.isfinite(self.y).all():
            raise ValueError("sample covariates and responses must be finite")

    @property
    def n(self) -> int:
        return self.y.shape[0]


def collect_samples(range_fields_by_level: dict[float, Sequence],
                    domain: DomainMask,
                    blocks: Sequence[int] | None = None) -> RangeSamples:
    """Build regression samples from per-level lists of range fields.

    Only strictly positive ranges inside the domain become samples.
    ``blocks`` assigns a block id to each slice index (defaults to the
    slice index itself).
    """
    ys, xs, covs, resp, blk = [], [], [], [], []
    inside = domain.inside
    for p, fields in range_fields_by_level.items():
        cov = loglog_level(p)
        for t, rf in enumerate(fields):
            sel = (rf.r > 0) & inside
            if not sel.any():
                continue
            iy, ix = np.nonzero(sel)
            ys.append(iy)
            xs.append(ix)
            covs.append(np.full(iy.size, cov))
            resp.append(np.log(rf.r[sel]))
            b = blocks[t] if blocks is not None else t
            blk.append(np.full(iy.size, b, dtype=np.int64))
    if not ys:
        raise DegenerateFitError("no positive range observations to fit")
    return RangeSamples(
        pixel_y=np.concatenate(ys),
        pixel_x=np.concatenate(xs),
        x=np.concatenate(covs),
        y=np.concatenate(resp),
        block=np.concatenate(blk),
    )


# ---------------------------------------------------------------------------
# exact per-pixel least absolute deviation
# ---------------------------------------------------------------------------

def lad_objective(beta: float, theta: float, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.abs(y - (beta - theta * x)).sum())


def fit_mer_pixel(x, y) -> tuple[float, float]:
    """Exact LAD fit of y = beta - theta*x by enumerating candidate lines
    through all sample pairs with distinct covariates.

    Some optimal LAD line interpolates two samples, so the enumeration is
    exact; ties are broken by smallest theta then smallest beta.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if x.size < 2:
        raise DegenerateFitError("need at least two samples")
    if np.unique(x).size < 2:
        raise DegenerateFitError("all samples share one covariate value; slope unidentifiable")
    ii, jj = np.triu_indices(x.size, k=1)
    keep = x[ii] != x[jj]
    ii, jj = ii[keep], jj[keep]
    slope = (y[jj] - y[ii]) / (x[jj] - x[ii])
    theta_c = -slope
    beta_c = y[ii] + theta_c * x[ii]
    # evaluate candidates in manageable chunks: objective is sum |y - (b - t x)|
    best = (math.inf, math.inf, math.inf)
    chunk = max(1, int(2_000_000 // max(x.size, 1)))
    for start in range(0, theta_c.size, chunk):
        tc = theta_c[start:start + chunk]
        bc = beta_c[start:start + chunk]
        resid = y[None, :] - (bc[:, None] - tc[:, None] * x[None, :])
        obj = np.abs(resid).sum(axis=1)
        k = int(np.lexsort((bc, tc, obj))[0])
        cand = (float(obj[k]), float(tc[k]), float(bc[k]))
        if cand < best:
            best = cand
    _, theta, beta = best
    return beta, theta


# ---------------------------------------------------------------------------
# spline surfaces
# ---------------------------------------------------------------------------

def _clamped_knots(lo: float, hi: float, n_basis: int, degree: int = 3) -> np.ndarray:
    if n_basis < degree + 1:
        raise ValueError(f"need at least {degree + 1} basis functions, got {n_basis}")
    if hi <= lo:
        hi = lo + 1.0
    interior = np.linspace(lo, hi, n_basis - degree + 1)[1:-1]
    return np.r_[[lo] * (degree + 1), interior, [hi] * (degree + 1)]


def _basis_1d(coords: np.ndarray, lo: float, hi: float, n_basis: int) -> sparse.csr_matrix:
    t = _clamped_knots(lo, hi, n_basis)
    x = np.clip(np.asarray(coords, dtype=np.float64), lo, hi)
    return BSpline.design_matrix(x, t, 3).tocsr()


def _difference_operator(n: int, order: int) -> sparse.csr_matrix:
    if n <= order:
        return sparse.csr_matrix((0, n))
    stencil = {1: [-1.0, 1.0], 2: [1.0, -2.0, 1.0]}[order]
    m = n - order
    rows = np.repeat(np.arange(m), order + 1)
    cols = (np.arange(m)[:, None] + np.arange(order + 1)[None, :]).ravel()
    vals = np.tile(stencil, m)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(m, n))


def _roughness_penalty(nby: int, nbx: int) -> sparse.csr_matrix:
    """Gram matrix of first and second differences along the rows and
    columns of an nby-by-nbx coefficient grid.

    Including first differences makes the null space exactly the constant
    surfaces, so an infinite penalty reproduces the pooled constant fit.
    """
    total = None
    for order in (1, 2):
        drow = sparse.kron(sparse.identity(nby), _difference_operator(nbx, order), format="csr")
        dcol = sparse.kron(_difference_operator(nby, order), sparse.identity(nbx), format="csr")
        gram = drow.T @ drow + dcol.T @ dcol
        total = gram if total is None else total + gram
    return total.tocsr()


@dataclass(frozen=True)
class MerSurface:
    """Fitted coefficient maps of the median-extremal-range model.

    ``beta`` and ``theta`` are per-pixel evaluations of the fitted
    surfaces (or the raw per-pixel estimates in PerPixel mode);
    ``se_beta`` and ``se_theta`` hold jackknife standard errors when
    computed, else NaN.
    """

    beta: np.ndarray
    theta: np.ndarray
    fit_mode: str
    se_beta: np.ndarray | None = None
    se_theta: np.ndarray | None = None
    knots: tuple[int, int] | None = None
    penalty: float | None = None
    coef_beta: np.ndarray | None = field(default=None, repr=False)
    coef_theta: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.beta.shape != self.theta.shape:
            raise ValueError("beta and theta maps must share a shape")


def predict_mer(surface: MerSurface, iy: int, ix: int, p: float,
                domain: DomainMask | None = None) -> float:
    """Median extremal range exp(beta_s - theta_s * log(-log(1-p)))."""
    x = loglog_level(p)
    ny, nx = surface.beta.shape
    if not (0 <= iy < ny and 0 <= ix < nx):
        raise ValueError(f"pixel ({iy},{ix}) outside the {ny}x{nx} grid")
    if domain is not None and not domain.inside[iy, ix]:
        raise ValueError(f"pixel ({iy},{ix}) is outside the domain")
    return float(np.exp(surface.beta[iy, ix] - surface.theta[iy, ix] * x))


def predict_mer_map(surface: MerSurface, p: float) -> np.ndarray:
    """Median-extremal-range map at level p from fitted coefficient maps."""
    return np.exp(surface.beta - surface.theta * loglog_level(p))


class SplineMerModel:
    """Spatially smooth median regression of log range on log(-log(1-p)).

    Estimator-style interface: construct with hyperparameters, ``fit`` on
    samples, then ``predict`` medians at new levels. ``get_params`` and
    ``set_params`` follow the usual estimator conventions.
    """

    def __init__(self, knots_x: int = 8, knots_y: int = 8, penalty: float = 1.0,
                 iters: int = 60, seed: int = 0):
        self.knots_x = knots_x
        self.knots_y = knots_y
        self.penalty = penalty
        self.iters = iters
        self.seed = seed

    def get_params(self) -> dict:
        return {
            "knots_x": self.knots_x,
            "knots_y": self.knots_y,
            "penalty": self.penalty,
            "iters": self.iters,
            "seed": self.seed,
        }

    def set_params(self, **params) -> "SplineMerModel":
        for k, v in params.items():
            if k not in self.get_params():
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        return self

    # internal: design matrix for sample pixels
    def _design(self, samples: RangeSamples, shape: tuple[int, int]) -> sparse.csr_matrix:
        ny, nx = shape
        by = _basis_1d(samples.pixel_y, 0.0, float(ny - 1), self.knots_y)
        bx = _basis_1d(samples.pixel_x, 0.0, float(nx - 1), self.knots_x)
        n = samples.n
        by_idx = by.indices.reshape(n, -1)
        by_val = by.data.reshape(n, -1)
        bx_idx = bx.indices.reshape(n, -1)
        bx_val = bx.data.reshape(n, -1)
        cols = (by_idx[:, :, None] * self.knots_x + bx_idx[:, None, :]).reshape(n, -1)
        vals = (by_val[:, :, None] * bx_val[:, None, :]).reshape(n, -1)
        rows = np.repeat(np.arange(n), cols.shape[1])
        nb = self.knots_x * self.knots_y
        return sparse.csr_matrix(
            (vals.ravel(), (rows, cols.ravel())), shape=(n, nb)
        )

    def _data_loss_and_grad(self, params: np.ndarray, design: sparse.csr_matrix,
                            x: np.ndarray, y: np.ndarray,
                            kappa: float) -> tuple[float, np.ndarray]:
        """Smoothed median pinball loss with its exact gradient. The
        pinball |e|/2 is replaced by e^2/(4 kappa) inside |e| <= kappa,
        keeping the loss C1."""
        nb = design.shape[1]
        b = params[:nb]
        c = params[nb:]
        pred = design @ b - x * (design @ c)
        e = y - pred
        abse = np.abs(e)
        inband = abse <= kappa
        loss = float(np.where(inband, e * e / (4.0 * kappa), 0.5 * abse - kappa / 4.0).sum())
        w = np.where(inband, e / (2.0 * kappa), 0.5 * np.sign(e))
        grad_b = -(design.T @ w)
        grad_c = design.T @ (w * x)
        return loss, np.concatenate([grad_b, grad_c])

    def objective_and_grad(self, params: np.ndarray, design: sparse.csr_matrix,
                           x: np.ndarray, y: np.ndarray, kappa: float,
                           penalty_mat: sparse.csr_matrix) -> tuple[float, np.ndarray]:
        """Full objective (smoothed pinball plus roughness penalty) and its
        exact gradient."""
        loss, grad = self._data_loss_and_grad(params, design, x, y, kappa)
        nb = design.shape[1]
        b = params[:nb]
        c = params[nb:]
        pb = penalty_mat @ b
        pc = penalty_mat @ c
        loss += self.penalty * float(b @ pb + c @ pc)
        grad[:nb] += 2.0 * self.penalty * pb
        grad[nb:] += 2.0 * self.penalty * pc
        return loss, grad

    def fit(self, samples: RangeSamples, shape: tuple[int, int]) -> "SplineMerModel":
        """Minimize the annealed smoothed-pinball objective by
        majorize-minimize: each iteration reweights the quadratic
        majorizer of the smoothed pinball at the current residuals and
        solves the penalized normal equations exactly. Every step
        decreases the objective, stiff penalties are handled exactly, and
        a fixed iteration budget keeps the fit deterministic.
        """
        nb = self.knots_x * self.knots_y
        if samples.n < 2 * nb:
            raise DegenerateFitError(
                f"{samples.n} samples cannot identify {2 * nb} spline coefficients"
            )
        if np.unique(samples.x).size < 2:
            raise DegenerateFitError("all samples share one level; slope unidentifiable")
        design = self._design(samples, shape)
        penalty_mat = _roughness_penalty(self.knots_y, self.knots_x)
        pen_dense = penalty_mat.toarray()
        x, y = samples.x, samples.y
        beta0, theta0 = _pooled_median_line(samples)
        params = np.concatenate([np.full(nb, beta0), np.full(nb, theta0)])
        for kappa, n_iter in _kappa_stages(self.iters):
            params = self._irls_stage(params, design, x, y, kappa, pen_dense, n_iter)
        self.shape_ = shape
        self.coef_beta_ = params[:nb].copy()
        self.coef_theta_ = params[nb:].copy()
        return self

    def _irls_stage(self, params: np.ndarray, design: sparse.csr_matrix,
                    x: np.ndarray, y: np.ndarray, kappa: float,
                    pen_dense: np.ndarray, n_iter: int) -> np.ndarray:
        nb = design.shape[1]
        dim = 2 * nb
        pen_block = np.zeros((dim, dim))
        pen_block[:nb, :nb] = pen_dense
        pen_block[nb:, nb:] = pen_dense
        for _ in range(n_iter):
            b = params[:nb]
            c = params[nb:]
            e = y - (design @ b - x * (design @ c))
            # quadratic majorizer weight of the smoothed pinball at e
            w = 1.0 / (2.0 * np.maximum(np.abs(e), kappa))
            bw = design.multiply(w[:, None]).tocsr()
            m_bb = (design.T @ bw).toarray()
            bwx = design.multiply((w * x)[:, None]).tocsr()
            m_bc = -(design.T @ bwx).toarray()
            bwx2 = design.multiply((w * x * x)[:, None]).tocsr()
            m_cc = (design.T @ bwx2).toarray()
            data_block = np.block([[m_bb, m_bc], [m_bc.T, m_cc]])
            mat = data_block + 2.0 * self.penalty * pen_block
            rhs = np.concatenate([design.T @ (w * y), -(design.T @ (w * x * y))])
            # tiny ridge at the data scale only; the penalty trace can be
            # arbitrarily large and must not leak into the null space
            ridge = 1e-10 * float(np.trace(data_block)) / dim
            mat[np.diag_indices(dim)] += ridge
            params = np.linalg.solve(mat, rhs)
        return params

    def coefficient_maps(self) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate the fitted surfaces at every pixel center."""
        ny, nx = self.shape_
        by = _basis_1d(np.arange(ny, dtype=np.float64), 0.0, float(ny - 1), self.knots_y)
        bx = _basis_1d(np.arange(nx, dtype=np.float64), 0.0, float(nx - 1), self.knots_x)
        cb = self.coef_beta_.reshape(self.knots_y, self.knots_x)
        ct = self.coef_theta_.reshape(self.knots_y, self.knots_x)
        beta = by @ cb @ bx.T
        theta = by @ ct @ bx.T
        return np.asarray(beta), np.asarray(theta)

    def predict(self, iy, ix, p: float) -> np.ndarray:
        """Median extremal range at pixels (iy, ix) and level p."""
        beta, theta = self.coefficient_maps()
        xval = loglog_level(p)
        return np.exp(beta[iy, ix] - theta[iy, ix] * xval)

    def to_surface(self) -> MerSurface:
        beta, theta = self.coefficient_maps()
        return MerSurface(
            beta=beta, theta=theta, fit_mode="spline",
            knots=(self.knots_y, self.knots_x), penalty=self.penalty,
            coef_beta=self.coef_beta_, coef_theta=self.coef_theta_,
        )


def _pooled_median_line(samples: RangeSamples) -> tuple[float, float]:
    """Warm start: exact LAD line through the per-level response medians.

    There are only as many distinct covariate values as threshold levels,
    so the pair enumeration stays trivial regardless of sample count.
    """
    xs = np.unique(samples.x)
    med = np.array([np.median(samples.y[samples.x == x]) for x in xs])
    return fit_mer_pixel(xs, med)


def _kappa_stages(iters: int) -> list[tuple[float, int]]:
    third = max(1, iters // 3)
    return [(0.1, third), (0.01, third), (0.001, max(1, iters - 2 * third))]


def fit_mer_pixel_map(samples: RangeSamples, shape: tuple[int, int],
                      min_samples: int = 3) -> MerSurface:
    """Independent exact LAD fit at every pixel with enough observations.

    Pixels with fewer than ``min_samples`` observations or a single
    distinct level get NaN coefficients.
    """
    ny, nx = shape
    beta = np.full(shape, np.nan)
    theta = np.full(shape, np.nan)
    flat = samples.pixel_y.astype(np.int64) * nx + samples.pixel_x.astype(np.int64)
    order = np.argsort(flat, kind="stable")
    flat = flat[order]
    xs = samples.x[order]
    ys = samples.y[order]
    starts = np.flatnonzero(np.r_[True, np.diff(flat) > 0])
    ends = np.r_[starts[1:], flat.size]
    for s, e in zip(starts, ends):
        if e - s < min_samples:
            continue
        xv = xs[s:e]
        if np.unique(xv).size < 2:
            continue
        b, t = fit_mer_pixel(xv, ys[s:e])
        pix = flat[s]
        beta[pix // nx, pix % nx] = b
        theta[pix // nx, pix % nx] = t
    return MerSurface(beta=beta, theta=theta, fit_mode="pixel")


# ---------------------------------------------------------------------------
# block jackknife
# ---------------------------------------------------------------------------

def jackknife_estimates(stack: RasterStack, block_ids: Sequence[int],
                        estimator: Callable[[RasterStack], np.ndarray]) -> np.ndarray:
    """Delete-one-block estimates of a full-chain estimator, one row per
    block (useful for sign diagnostics on top of the standard errors)."""
    block_ids = np.asarray(block_ids)
    if block_ids.shape != (stack.nt,):
        raise ValueError(f"need one block id per slice, got {block_ids.shape}")
    blocks = np.unique(block_ids)
    if blocks.size < 3:
        raise ValueError(f"need at least 3 blocks, got {blocks.size}")
    estimates = []
    for b in blocks:
        keep = np.flatnonzero(block_ids != b)
        estimates.append(np.asarray(estimator(stack.subset(keep)), dtype=np.float64))
    return np.stack(estimates)


def jackknife(stack: RasterStack, block_ids: Sequence[int],
              estimator: Callable[[RasterStack], np.ndarray]) -> np.ndarray:
    """Delete-one-block jackknife standard error of a full-chain estimator.

    ``estimator`` maps a stack (a subset of slices) to an array of
    estimates; the returned array holds the jackknife SE per component:
    sqrt((B-1)/B * sum_b (est_b - mean)^2).
    """
    est = jackknife_estimates(stack, block_ids, estimator)
    n_blocks = est.shape[0]
    mean = est.mean(axis=0)
    return np.sqrt((n_blocks - 1) / n_blocks * ((est - mean) ** 2).sum(axis=0))


# ---------------------------------------------------------------------------
# consistency harness for the two-level estimator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaConsistencyRow:
    n: int
    p_n: float
    theta: float


def consistency_check_theta(simulate: Callable[[int], RasterStack],
                            n_values: Sequence[int], gamma: float,
                            p0: float = 0.9) -> list[ThetaConsistencyRow]:
    """Tabulate theta_hat(p0, 1 - n^-gamma) against the number of slices.

    ``simulate`` maps a slice count to a stack; the level sequence
    p_n = 1 - n^-gamma keeps n*(1-p_n) growing for gamma in (0,1).
    """
    from .ranges import median_range, range_field
    from .thresholds import BoundaryPolicy, excursion_mask, quantile_field

    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0,1), got {gamma}")
    rows = []
    for n in n_values:
        if n < 2:
            raise ValueError(f"need at least 2 slices, got {n}")
        p_n = 1.0 - float(n) ** (-gamma)
        if not p_n > p0:
            raise ValueError(f"p_n={p_n} must exceed p0={p0}; increase n or gamma")
        stack = simulate(n)
        domain = stack.domain()
        medians = {}
        for p in (p0, p_n):
            thr = quantile_field(stack, p)
            fields = []
            for t in range(stack.nt):
                mask = excursion_mask(stack, t, thr, BoundaryPolicy.FILL_EXCEED)
                fields.append(range_field(mask, domain, stack.dx, edge_fallback=True))
            medians[p] = median_range(fields, domain)
        rows.append(ThetaConsistencyRow(
            n=n, p_n=p_n, theta=theta_hat(medians[p0], medians[p_n], p0, p_n)
        ))
    return rows
