"""Command line front-end wiring the estimation pipeline.

Subcommands: simulate, quantiles, excursion, range, cdf, hist, chi,
ivdens, theta, mer, jackknife, pipeline. All tabular output is RFC-4180
CSV with a header row; maps use the raw float32 + JSON sidecar format.
Every output file is written to a temporary name and renamed, so files
are either complete or absent. All randomness derives from --seed.

Exit codes: 0 success, 2 flag or value validation, 3 malformed input
files, 4 I/O failure, 5 any other computation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import geometry, ranges, raster, simgrf, tailfit, thresholds
from .errors import ExrangeError, StackFormatError
from .thresholds import BoundaryPolicy

EXIT_VALIDATION = 2
EXIT_FORMAT = 3
EXIT_IO = 4
EXIT_COMPUTE = 5

DEFAULT_LEVELS = "0.85:0.98:0.01"


def _parse_grid(spec: str, name: str) -> list[float]:
    """Parse 'start:stop:step' or a comma list into a float list."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"{name}: expected start:stop:step, got {spec!r}")
        start, stop, step = (float(x) for x in parts)
        if step <= 0:
            raise ValueError(f"{name}: step must be positive")
        n = int(math.floor((stop - start) / step + 0.5))
        values = [round(start + i * step, 12) for i in range(n + 1)]
        values = [v for v in values if v <= stop + step * 1e-9]
    else:
        values = [float(x) for x in spec.split(",") if x.strip()]
    if not values:
        raise ValueError(f"{name}: empty list")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name}: values must be strictly increasing, got {values}")
    return values


def _parse_levels(spec: str) -> list[float]:
    levels = _parse_grid(spec, "levels")
    if levels[0] <= 0 or levels[-1] >= 1:
        raise ValueError(f"levels must lie strictly inside (0,1), got {levels}")
    return levels


def _parse_lags(spec: str) -> list[tuple[int, int]]:
    lags = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            a, b = item.split(":")
            lags.append((int(b), int(a)))  # stored as (row, col) from "x:y"
        else:
            lags.append((0, int(item)))
    if not lags:
        raise ValueError("empty lag list")
    return lags


def _parse_knots(spec: str) -> tuple[int, int]:
    try:
        a, b = spec.lower().split("x")
        return int(a), int(b)
    except Exception as exc:
        raise ValueError(f"knots must look like 8x8, got {spec!r}") from exc


def _resolve_input(path_arg: str) -> Path:
    p = Path(path_arg)
    if p.is_dir():
        candidates = sorted(p.glob("*.f32"))
        if len(candidates) != 1:
            raise ValueError(
                f"{p}: expected exactly one .f32 stack in the directory, "
                f"found {len(candidates)}"
            )
        return candidates[0]
    return p


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("EXRANGE_THREADS")
        n = int(env) if env else (os.cpu_count() or 1)
    if n < 1:
        raise ValueError(f"--threads must be at least 1, got {n}")
    return n


def _pmap(fn, items, n_threads: int) -> list:
    items = list(items)
    if n_threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n_threads) as ex:
        return list(ex.map(fn, items))


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue().encode())
    os.replace(tmp, path)


def _save_map_with_csv(out_dir: Path, name: str, grid: np.ndarray,
                       domain: raster.DomainMask, dx: float, unit: str) -> None:
    filled = np.asarray(grid, dtype=np.float64).copy()
    filled[~domain.inside] = raster.DEFAULT_NODATA
    filled[~np.isfinite(filled)] = raster.DEFAULT_NODATA
    raster.save_map(out_dir / f"{name}.f32", filled.astype(np.float32), dx=dx, unit=unit)
    _write_csv(
        out_dir / f"{name}.csv",
        ["x_index", "y_index", "value"],
        (
            (x, y, float(np.float32(v)))
            for x, y, v in raster.map_to_csv_rows(filled.astype(np.float32), domain)
            if np.float32(v) != np.float32(raster.DEFAULT_NODATA)
        ),
    )


def _fmt_p(p: float) -> str:
    return f"{p:g}"


def _range_fields_for_level(stack: raster.RasterStack, p: float,
                            policy: BoundaryPolicy, n_threads: int):
    thr = thresholds.quantile_field(stack, p)
    domain = stack.domain()

    def one(t: int):
        mask = thresholds.excursion_mask(stack, t, thr, policy)
        return ranges.range_field(mask, domain, stack.dx, edge_fallback=True)

    return thr, _pmap(one, range(stack.nt), n_threads)


def _default_radii(stack: raster.RasterStack) -> list[float]:
    r_max = ranges.domain_inradius(stack.domain(), stack.dx)
    radii = [k * stack.dx for k in range(1, 9)]
    radii = [r for r in radii if r < r_max]
    if not radii:
        raise ValueError(f"domain inradius {r_max} leaves no usable radius")
    return radii


def _load_blocks(path: str, nt: int) -> np.ndarray:
    ids = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            ids.append(int(line))
    if len(ids) != nt:
        raise ValueError(f"{path}: {len(ids)} block ids for {nt} slices")
    return np.asarray(ids)


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    cfg = simgrf.GaussianSimConfig(
        nx=args.nx, ny=args.ny, n_slices=args.n, nu=args.nu, ell=args.ell,
        dx=args.dx, seed=args.seed,
    )
    if args.model == "gaussian":
        stack = simgrf.simulate_gaussian(cfg)
    else:
        stack = simgrf.simulate_ad_field(simgrf.AdSimConfig(base=cfg, a_mix=args.a_mix))
    out = Path(args.out)
    raster.save_stack(out / "stack.f32", stack)
    print(f"wrote {out / 'stack.f32'} ({stack.nt}x{stack.ny}x{stack.nx})")
    return 0


def _cmd_quantiles(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    out = Path(args.out)
    domain = stack.domain()
    for p in _parse_levels(args.p):
        thr = thresholds.quantile_field(stack, p)
        _save_map_with_csv(out, f"threshold_p{_fmt_p(p)}", thr.u, domain, stack.dx, stack.unit)
    return 0


def _cmd_excursion(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    policy = BoundaryPolicy(args.policy)
    out = Path(args.out)
    for p in _parse_levels(args.p):
        thr = thresholds.quantile_field(stack, p)
        for t in range(stack.nt):
            mask = thresholds.excursion_mask(stack, t, thr, policy)
            raster.save_map(
                out / f"excursion_p{_fmt_p(p)}_t{t}.f32",
                mask.exceed.astype(np.float32), dx=stack.dx, unit="bool",
            )
    return 0


def _cmd_range(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    policy = BoundaryPolicy(args.policy)
    n_threads = _threads(args)
    out = Path(args.out)
    for p in _parse_levels(args.p):
        _, fields = _range_fields_for_level(stack, p, policy, n_threads)
        for t, rf in enumerate(fields):
            raster.save_map(
                out / f"range_p{_fmt_p(p)}_t{t}.f32",
                rf.r.astype(np.float32), dx=stack.dx, unit=stack.unit,
            )
    return 0


def _cmd_cdf(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    policy = BoundaryPolicy(args.policy)
    n_threads = _threads(args)
    domain = stack.domain()
    radii = (_parse_grid(args.radii, "radii") if args.radii else _default_radii(stack))
    out = Path(args.out)
    for p in _parse_levels(args.p):
        _, fields = _range_fields_for_level(stack, p, policy, n_threads)
        est = ranges.ecdf(fields, domain, radii, stack.dx)
        rows = [
            [float(r), float(f_val), int(n_exc)]
            for r, f_val, n_exc in zip(est.radii, est.F, est.n_exceed)
        ]
        _write_csv(out / f"cdf_p{_fmt_p(p)}.csv", ["r", "F", "n_exceed"], rows)
    return 0


def _cmd_hist(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    policy = BoundaryPolicy(args.policy)
    n_threads = _threads(args)
    domain = stack.domain()
    r_max = ranges.domain_inradius(domain, stack.dx)
    edges = np.arange(0.0, r_max + stack.dx, stack.dx)
    out = Path(args.out)
    rows = []
    for p in _parse_levels(args.p):
        _, fields = _range_fields_for_level(stack, p, policy, n_threads)
        vals = np.concatenate([rf.r[domain.inside & (rf.r > 0)] for rf in fields])
        counts, _ = np.histogram(vals, bins=edges)
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            rows.append([_fmt_p(p), float(lo), float(hi), int(c)])
    _write_csv(out / "hist.csv", ["p", "bin_left", "bin_right", "count"], rows)
    return 0


def _cmd_chi(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    lags = _parse_lags(args.lags)
    out = Path(args.out)
    domain = stack.domain()
    for p in _parse_levels(args.p):
        rows = []
        for dy, dxp in lags:
            chi = ranges.tail_dependence(stack, p, (dy, dxp))
            rows.append([dxp, dy, float(chi)])
            if args.per_pixel:
                chi_map = ranges.tail_dependence(stack, p, (dy, dxp), per_pixel=True)
                _save_map_with_csv(out, f"chi_p{_fmt_p(p)}_lag{dxp}x{dy}",
                                   chi_map, domain, stack.dx, "chi")
        _write_csv(out / f"chi_p{_fmt_p(p)}.csv", ["lag_x", "lag_y", "chi"], rows)
    return 0


def _cmd_ivdens(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    domain = stack.domain()
    out = Path(args.out)
    rows = []
    for p in _parse_levels(args.p):
        thr = thresholds.quantile_field(stack, p)
        masks = [
            thresholds.excursion_mask(stack, t, thr, BoundaryPolicy.ERODE)
            for t in range(stack.nt)
        ]
        dens = geometry.intrinsic_densities(
            (stack.values[t] for t in range(stack.nt)), masks, thr, domain, stack.dx
        )
        slope = geometry.cdf_slope(dens.c1, dens.c2) if dens.c2 > 0 else float("nan")
        rows.append([_fmt_p(p), dens.c0, dens.c1, dens.c2, slope])
    _write_csv(out / "ivdens.csv", ["p", "c0", "c1", "c2", "slope_pred"], rows)
    return 0


def _theta_map(stack: raster.RasterStack, p1: float, p2: float,
               policy: BoundaryPolicy, n_threads: int) -> np.ndarray:
    domain = stack.domain()
    _, fields1 = _range_fields_for_level(stack, p1, policy, n_threads)
    med1 = ranges.median_range_map(fields1, domain)
    del fields1
    _, fields2 = _range_fields_for_level(stack, p2, policy, n_threads)
    med2 = ranges.median_range_map(fields2, domain)
    theta = np.zeros_like(med1)
    x1 = tailfit.loglog_level(p1)
    x2 = tailfit.loglog_level(p2)
    both = (med1 > 0) & (med2 > 0)
    theta[both] = (np.log(med2[both]) - np.log(med1[both])) / (x1 - x2)
    return theta


def _cmd_theta(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    if args.p1 == args.p2:
        raise ValueError("--p1 and --p2 must differ")
    policy = BoundaryPolicy(args.policy)
    theta = _theta_map(stack, args.p1, args.p2, policy, _threads(args))
    _save_map_with_csv(Path(args.out), "theta_map", theta, stack.domain(), stack.dx, "theta")
    return 0


def _collect_all_samples(stack: raster.RasterStack, levels: list[float],
                         policy: BoundaryPolicy, n_threads: int,
                         blocks=None, min_range: float = 0.0) -> tailfit.RangeSamples:
    parts = []
    domain = stack.domain()
    for p in levels:
        _, fields = _range_fields_for_level(stack, p, policy, n_threads)
        part = tailfit.collect_samples({p: fields}, domain, blocks=blocks)
        if min_range > 0:
            keep = part.y >= math.log(min_range)
            part = tailfit.RangeSamples(
                pixel_y=part.pixel_y[keep], pixel_x=part.pixel_x[keep],
                x=part.x[keep], y=part.y[keep], block=part.block[keep],
            )
        parts.append(part)
    return tailfit.RangeSamples(
        pixel_y=np.concatenate([s.pixel_y for s in parts]),
        pixel_x=np.concatenate([s.pixel_x for s in parts]),
        x=np.concatenate([s.x for s in parts]),
        y=np.concatenate([s.y for s in parts]),
        block=np.concatenate([s.block for s in parts]),
    )


def _fit_surface(stack: raster.RasterStack, samples: tailfit.RangeSamples, args):
    if args.fit == "pixel":
        return tailfit.fit_mer_pixel_map(samples, (stack.ny, stack.nx))
    ky, kx = _parse_knots(args.knots)
    if args.penalty == "auto":
        penalty = choose_penalty(samples, (stack.ny, stack.nx), ky, kx,
                                 args.iters, args.seed)
    else:
        penalty = float(args.penalty)
    model = tailfit.SplineMerModel(knots_x=kx, knots_y=ky, penalty=penalty,
                                   iters=args.iters, seed=args.seed)
    model.fit(samples, (stack.ny, stack.nx))
    return model.to_surface()


def choose_penalty(samples: tailfit.RangeSamples, shape, ky: int, kx: int,
                   iters: int, seed: int,
                   grid=(0.01, 0.1, 1.0, 10.0, 100.0), n_folds: int = 5) -> float:
    """Pick the roughness penalty by block-wise cross-validated pinball loss."""
    blocks = np.unique(samples.block)
    fold_of_block = {b: i % n_folds for i, b in enumerate(blocks)}
    folds = np.array([fold_of_block[b] for b in samples.block])
    best = (math.inf, grid[0])
    for lam in grid:
        total = 0.0
        for f in range(n_folds):
            train = folds != f
            if train.all() or not train.any():
                continue
            sub = tailfit.RangeSamples(
                pixel_y=samples.pixel_y[train], pixel_x=samples.pixel_x[train],
                x=samples.x[train], y=samples.y[train], block=samples.block[train],
            )
            model = tailfit.SplineMerModel(knots_x=kx, knots_y=ky, penalty=lam,
                                           iters=max(60, iters // 3), seed=seed)
            try:
                model.fit(sub, shape)
            except ExrangeError:
                total = math.inf
                break
            beta, theta = model.coefficient_maps()
            hold = ~train
            pred = (beta[samples.pixel_y[hold], samples.pixel_x[hold]]
                    - theta[samples.pixel_y[hold], samples.pixel_x[hold]] * samples.x[hold])
            total += float(np.abs(samples.y[hold] - pred).sum()) * 0.5
        if (total, lam) < best:
            best = (total, lam)
    return best[1]


def _cmd_mer(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    levels = _parse_levels(args.levels)
    policy = BoundaryPolicy(args.policy)
    n_threads = _threads(args)
    domain = stack.domain()
    blocks = _load_blocks(args.blocks_by, stack.nt) if args.blocks_by else None
    samples = _collect_all_samples(stack, levels, policy, n_threads, blocks,
                                   args.min_range)
    surface = _fit_surface(stack, samples, args)
    out = Path(args.out)
    _save_map_with_csv(out, "mer_beta", surface.beta, domain, stack.dx, "log-range")
    _save_map_with_csv(out, "mer_theta", surface.theta, domain, stack.dx, "theta")
    if args.predict_p is not None:
        pred = tailfit.predict_mer_map(surface, args.predict_p)
        _save_map_with_csv(out, f"mer_p{_fmt_p(args.predict_p)}", pred, domain,
                           stack.dx, stack.unit)
    return 0


def _cmd_jackknife(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    levels = _parse_levels(args.levels)
    policy = BoundaryPolicy(args.policy)
    n_threads = _threads(args)
    domain = stack.domain()
    block_ids = _load_blocks(args.blocks_by, stack.nt)

    def estimator(sub: raster.RasterStack) -> np.ndarray:
        samples = _collect_all_samples(sub, levels, policy, n_threads,
                                       min_range=args.min_range)
        surface = _fit_surface(sub, samples, args)
        return np.stack([surface.beta, surface.theta])

    se = tailfit.jackknife(stack, block_ids, estimator)
    out = Path(args.out)
    _save_map_with_csv(out, "se_beta", se[0], domain, stack.dx, "se")
    _save_map_with_csv(out, "se_theta", se[1], domain, stack.dx, "se")
    return 0


def _cmd_pipeline(args) -> int:
    stack = raster.load_stack(_resolve_input(args.input))
    levels = _parse_levels(args.levels)
    policy = BoundaryPolicy(args.policy)
    n_threads = _threads(args)
    domain = stack.domain()
    out = Path(args.out)
    radii = (_parse_grid(args.radii, "radii") if args.radii else _default_radii(stack))
    r_max = ranges.domain_inradius(domain, stack.dx)
    hist_edges = np.arange(0.0, r_max + stack.dx, stack.dx)
    blocks = _load_blocks(args.blocks_by, stack.nt) if args.blocks_by else None

    cdf_rows, hist_rows, iv_rows = [], [], []
    sample_parts = []
    med_maps = {}
    for p in levels:
        thr, fields = _range_fields_for_level(stack, p, policy, n_threads)
        est = ranges.ecdf(fields, domain, radii, stack.dx)
        for r, f_val, n_exc in zip(est.radii, est.F, est.n_exceed):
            cdf_rows.append([_fmt_p(p), float(r), float(f_val), int(n_exc)])
        vals = np.concatenate([rf.r[domain.inside & (rf.r > 0)] for rf in fields])
        counts, _ = np.histogram(vals, bins=hist_edges)
        for lo, hi, c in zip(hist_edges[:-1], hist_edges[1:], counts):
            hist_rows.append([_fmt_p(p), float(lo), float(hi), int(c)])
        masks = [
            thresholds.excursion_mask(stack, t, thr, BoundaryPolicy.ERODE)
            for t in range(stack.nt)
        ]
        dens = geometry.intrinsic_densities(
            (stack.values[t] for t in range(stack.nt)), masks, thr, domain, stack.dx
        )
        slope = geometry.cdf_slope(dens.c1, dens.c2) if dens.c2 > 0 else float("nan")
        iv_rows.append([_fmt_p(p), dens.c0, dens.c1, dens.c2, slope])
        if p in (levels[0], levels[-1]):
            med_maps[p] = ranges.median_range_map(fields, domain)
        part = tailfit.collect_samples({p: fields}, domain, blocks=blocks)
        if args.min_range > 0:
            keep = part.y >= math.log(args.min_range)
            part = tailfit.RangeSamples(
                pixel_y=part.pixel_y[keep], pixel_x=part.pixel_x[keep],
                x=part.x[keep], y=part.y[keep], block=part.block[keep],
            )
        sample_parts.append(part)
        del fields

    _write_csv(out / "cdf.csv", ["p", "r", "F", "n_exceed"], cdf_rows)
    _write_csv(out / "hist.csv", ["p", "bin_left", "bin_right", "count"], hist_rows)
    _write_csv(out / "ivdens.csv", ["p", "c0", "c1", "c2", "slope_pred"], iv_rows)

    p_lo, p_hi = levels[0], levels[-1]
    theta = np.zeros((stack.ny, stack.nx))
    both = (med_maps[p_lo] > 0) & (med_maps[p_hi] > 0)
    x_lo, x_hi = tailfit.loglog_level(p_lo), tailfit.loglog_level(p_hi)
    theta[both] = (np.log(med_maps[p_hi][both]) - np.log(med_maps[p_lo][both])) / (x_lo - x_hi)
    _save_map_with_csv(out, "theta_map", theta, domain, stack.dx, "theta")

    samples = tailfit.RangeSamples(
        pixel_y=np.concatenate([s.pixel_y for s in sample_parts]),
        pixel_x=np.concatenate([s.pixel_x for s in sample_parts]),
        x=np.concatenate([s.x for s in sample_parts]),
        y=np.concatenate([s.y for s in sample_parts]),
        block=np.concatenate([s.block for s in sample_parts]),
    )
    surface = _fit_surface(stack, samples, args)
    _save_map_with_csv(out, "mer_beta", surface.beta, domain, stack.dx, "log-range")
    _save_map_with_csv(out, "mer_theta", surface.theta, domain, stack.dx, "theta")
    pred = tailfit.predict_mer_map(surface, args.predict_p)
    _save_map_with_csv(out, f"mer_p{_fmt_p(args.predict_p)}", pred, domain,
                       stack.dx, stack.unit)
    print(f"pipeline outputs written to {out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common_io(sub, with_policy: bool = True):
    sub.add_argument("--in", dest="input", required=True,
                     help="stack file (.f32) or directory holding one")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: EXRANGE_THREADS or all cores)")
    if with_policy:
        sub.add_argument("--policy", choices=[p.value for p in BoundaryPolicy],
                         default=BoundaryPolicy.FILL_EXCEED.value,
                         help="treatment of pixels outside the domain")


def _add_fit_options(sub, penalty_default: str = "auto"):
    sub.add_argument("--fit", choices=["pixel", "spline"], default="spline")
    sub.add_argument("--knots", default="8x8", help="spline knots as NYxNX")
    sub.add_argument("--penalty", default=penalty_default,
                     help="roughness penalty, a float or 'auto' for block CV")
    sub.add_argument("--iters", type=int, default=60, help="optimizer iteration budget")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--min-range", type=float, default=0.0, dest="min_range",
                     help="drop range observations below this length")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exrange",
        description="Extremal range of threshold exceedances on gridded fields",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("simulate", help="simulate a random-field stack")
    s.add_argument("--model", choices=["gaussian", "admix"], default="gaussian")
    s.add_argument("--nx", type=int, default=128)
    s.add_argument("--ny", type=int, default=128)
    s.add_argument("--n", type=int, required=True, help="number of slices")
    s.add_argument("--nu", type=float, default=2.0)
    s.add_argument("--ell", type=float, default=20.0)
    s.add_argument("--dx", type=float, default=1.0)
    s.add_argument("--a-mix", type=float, default=1.0, dest="a_mix")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_simulate)

    s = subs.add_parser("quantiles", help="per-pixel threshold maps")
    _add_common_io(s, with_policy=False)
    s.add_argument("--p", default=DEFAULT_LEVELS, help="levels as list or start:stop:step")
    s.set_defaults(func=_cmd_quantiles)

    s = subs.add_parser("excursion", help="excursion masks per slice and level")
    _add_common_io(s)
    s.add_argument("--p", default=DEFAULT_LEVELS)
    s.set_defaults(func=_cmd_excursion)

    s = subs.add_parser("range", help="extremal-range fields per slice and level")
    _add_common_io(s)
    s.add_argument("--p", default=DEFAULT_LEVELS)
    s.set_defaults(func=_cmd_range)

    s = subs.add_parser("cdf", help="empirical CDF of the extremal range")
    _add_common_io(s)
    s.add_argument("--p", default=DEFAULT_LEVELS)
    s.add_argument("--radii", default=None, help="radii as list or start:stop:step")
    s.set_defaults(func=_cmd_cdf)

    s = subs.add_parser("hist", help="histogram of positive extremal ranges")
    _add_common_io(s)
    s.add_argument("--p", default=DEFAULT_LEVELS)
    s.set_defaults(func=_cmd_hist)

    s = subs.add_parser("chi", help="pairwise tail dependence at pixel lags")
    _add_common_io(s, with_policy=False)
    s.add_argument("--p", default="0.9,0.95")
    s.add_argument("--lags", default="1:0,2:0,4:0,8:0,0:1,0:2,0:4,0:8",
                   help="comma list of x:y pixel offsets")
    s.add_argument("--per-pixel", action="store_true", dest="per_pixel",
                   help="also write one per-reference-pixel map per level and lag")
    s.set_defaults(func=_cmd_chi)

    s = subs.add_parser("ivdens", help="curvature densities per level")
    _add_common_io(s, with_policy=False)
    s.add_argument("--p", default=DEFAULT_LEVELS)
    s.set_defaults(func=_cmd_ivdens)

    s = subs.add_parser("theta", help="two-level tail decay rate map")
    _add_common_io(s)
    s.add_argument("--p1", type=float, required=True)
    s.add_argument("--p2", type=float, required=True)
    s.set_defaults(func=_cmd_theta)

    s = subs.add_parser("mer", help="median-extremal-range model fit")
    _add_common_io(s)
    s.add_argument("--levels", default=DEFAULT_LEVELS)
    s.add_argument("--predict-p", type=float, default=None, dest="predict_p")
    s.add_argument("--blocks-by", default=None, dest="blocks_by",
                   help="file with one block id per slice")
    _add_fit_options(s)
    s.set_defaults(func=_cmd_mer)

    s = subs.add_parser("jackknife", help="block-jackknife SEs of the fit")
    _add_common_io(s)
    s.add_argument("--levels", default=DEFAULT_LEVELS)
    s.add_argument("--blocks-by", required=True, dest="blocks_by")
    # the smoothing penalty is tuning, held fixed across replicates
    _add_fit_options(s, penalty_default="1.0")
    s.set_defaults(func=_cmd_jackknife)

    s = subs.add_parser("pipeline", help="the full estimation chain")
    _add_common_io(s)
    s.add_argument("--levels", default=DEFAULT_LEVELS)
    s.add_argument("--radii", default=None)
    s.add_argument("--predict-p", type=float, default=0.989, dest="predict_p")
    s.add_argument("--blocks-by", default=None, dest="blocks_by")
    # fixed default penalty keeps the one-shot pipeline fast; pass
    # --penalty auto for the cross-validated choice
    _add_fit_options(s, penalty_default="1.0")
    s.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"exrange: error: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StackFormatError as exc:
        print(f"exrange: error: format: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"exrange: error: io: {exc}", file=sys.stderr)
        return EXIT_IO
    except ExrangeError as exc:
        print(f"exrange: error: compute: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
