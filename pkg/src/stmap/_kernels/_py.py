"""Pure-Python (numpy) kernel implementations.

Reference semantics for the hot raster loops; the compiled extension in
``_core.pyx`` mirrors these functions exactly.  Selected automatically when
the extension is unavailable or when STMAP_PURE_PYTHON is set.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def footpad_max(values: np.ndarray, du: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """Per-cell max over the offset footprint; border cells use whatever
    offsets stay in bounds.  NaN cells are ignored; all-NaN gives NaN."""
    nrows, ncols = values.shape
    out = np.full((nrows, ncols), -np.inf)
    seen = np.zeros((nrows, ncols), dtype=bool)
    for k in range(len(du)):
        su, sv = int(du[k]), int(dv[k])
        r0, r1 = max(0, -sv), min(nrows, nrows - sv)
        c0, c1 = max(0, -su), min(ncols, ncols - su)
        if r0 >= r1 or c0 >= c1:
            continue
        win = values[r0 + sv : r1 + sv, c0 + su : c1 + su]
        ok = np.isfinite(win)
        dst = out[r0:r1, c0:c1]
        np.maximum(dst, np.where(ok, win, -np.inf), out=dst)
        seen[r0:r1, c0:c1] |= ok
    out[~seen] = np.nan
    return out


def mask_extremes(values: np.ndarray, du: np.ndarray, dv: np.ndarray):
    """Per-cell (max, min, valid) over the offset mask.

    Only strict-interior pixels (every offset in bounds) are valid; a NaN
    anywhere in the mask invalidates the pixel.
    """
    nrows, ncols = values.shape
    mu = int(np.max(np.abs(du))) if len(du) else 0
    mv = int(np.max(np.abs(dv))) if len(dv) else 0
    vmax = np.full((nrows, ncols), np.nan)
    vmin = np.full((nrows, ncols), np.nan)
    valid = np.zeros((nrows, ncols), dtype=np.uint8)
    if nrows - 2 * mv <= 0 or ncols - 2 * mu <= 0 or len(du) == 0:
        return vmax, vmin, valid
    sl = (slice(mv, nrows - mv), slice(mu, ncols - mu))
    acc_max = np.full((nrows - 2 * mv, ncols - 2 * mu), -np.inf)
    acc_min = np.full_like(acc_max, np.inf)
    any_nan = np.zeros_like(acc_max, dtype=bool)
    for k in range(len(du)):
        su, sv = int(du[k]), int(dv[k])
        win = values[mv + sv : nrows - mv + sv, mu + su : ncols - mu + su]
        any_nan |= ~np.isfinite(win)
        np.maximum(acc_max, win, out=acc_max)
        np.minimum(acc_min, win, out=acc_min)
    ok = ~any_nan
    vmax[sl] = np.where(ok, acc_max, np.nan)
    vmin[sl] = np.where(ok, acc_min, np.nan)
    valid[sl] = ok.astype(np.uint8)
    return vmax, vmin, valid


def mask_extremes_gauss3(mean: np.ndarray, sd: np.ndarray, du: np.ndarray, dv: np.ndarray):
    """Per-cell 3-sigma extremum approximation over the offset mask.

    Returns (mu_max, sg_max, mu_min, sg_min, valid): Gaussian approximations
    of max_i X_i and min_i X_i from the envelope of mu_i +/- 3 sd_i.
    """
    nrows, ncols = mean.shape
    mu_off = int(np.max(np.abs(du))) if len(du) else 0
    mv_off = int(np.max(np.abs(dv))) if len(dv) else 0
    shape = (nrows, ncols)
    mu_max = np.full(shape, np.nan)
    sg_max = np.full(shape, np.nan)
    mu_min = np.full(shape, np.nan)
    sg_min = np.full(shape, np.nan)
    valid = np.zeros(shape, dtype=np.uint8)
    ir, ic = nrows - 2 * mv_off, ncols - 2 * mu_off
    if ir <= 0 or ic <= 0 or len(du) == 0:
        return mu_max, sg_max, mu_min, sg_min, valid
    hi_max = np.full((ir, ic), -np.inf)
    lo_max = np.full((ir, ic), -np.inf)
    hi_min = np.full((ir, ic), np.inf)
    lo_min = np.full((ir, ic), np.inf)
    any_nan = np.zeros((ir, ic), dtype=bool)
    for k in range(len(du)):
        su, sv = int(du[k]), int(dv[k])
        m = mean[mv_off + sv : nrows - mv_off + sv, mu_off + su : ncols - mu_off + su]
        s = sd[mv_off + sv : nrows - mv_off + sv, mu_off + su : ncols - mu_off + su]
        any_nan |= ~(np.isfinite(m) & np.isfinite(s))
        hi = m + 3.0 * s
        lo = m - 3.0 * s
        np.maximum(hi_max, hi, out=hi_max)
        np.maximum(lo_max, lo, out=lo_max)
        np.minimum(hi_min, hi, out=hi_min)
        np.minimum(lo_min, lo, out=lo_min)
    ok = ~any_nan
    sl = (slice(mv_off, nrows - mv_off), slice(mu_off, ncols - mu_off))
    mu_max[sl] = np.where(ok, 0.5 * (hi_max + lo_max), np.nan)
    sg_max[sl] = np.where(ok, (hi_max - lo_max) / 6.0, np.nan)
    mu_min[sl] = np.where(ok, 0.5 * (hi_min + lo_min), np.nan)
    sg_min[sl] = np.where(ok, (hi_min - lo_min) / 6.0, np.nan)
    valid[sl] = ok.astype(np.uint8)
    return mu_max, sg_max, mu_min, sg_min, valid


def disk_max_arg(values: np.ndarray, du: np.ndarray, dv: np.ndarray, dx: np.ndarray, dy: np.ndarray):
    """Per-cell max over the offset mask plus the exact world offset of the
    first maximizing cell (offset order).  Interior pixels only."""
    nrows, ncols = values.shape
    mu = int(np.max(np.abs(du)))
    mv = int(np.max(np.abs(dv)))
    zmax = np.full((nrows, ncols), np.nan)
    ax = np.zeros((nrows, ncols))
    ay = np.zeros((nrows, ncols))
    valid = np.zeros((nrows, ncols), dtype=np.uint8)
    ir, ic = nrows - 2 * mv, ncols - 2 * mu
    if ir <= 0 or ic <= 0:
        return zmax, ax, ay, valid
    acc = np.full((ir, ic), -np.inf)
    accx = np.zeros((ir, ic))
    accy = np.zeros((ir, ic))
    any_nan = np.zeros((ir, ic), dtype=bool)
    for k in range(len(du)):
        su, sv = int(du[k]), int(dv[k])
        win = values[mv + sv : nrows - mv + sv, mu + su : ncols - mu + su]
        any_nan |= ~np.isfinite(win)
        better = win > acc
        acc = np.where(better, win, acc)
        accx = np.where(better, dx[k], accx)
        accy = np.where(better, dy[k], accy)
    ok = ~any_nan
    sl = (slice(mv, nrows - mv), slice(mu, ncols - mu))
    zmax[sl] = np.where(ok, acc, np.nan)
    ax[sl] = accx
    ay[sl] = accy
    valid[sl] = ok.astype(np.uint8)
    return zmax, ax, ay, valid


def exact_scan(
    dem: np.ndarray,
    padmax: np.ndarray,
    cell_size: float,
    leg_du: np.ndarray,  # (ntheta, nlegs) int leg pixel offsets
    leg_dv: np.ndarray,
    leg_x: np.ndarray,  # (ntheta, nlegs) exact leg offsets, meters
    leg_y: np.ndarray,
    triples: np.ndarray,  # (ntri, 3) CCW leg indices per triple
    disk_du: np.ndarray,  # body-disk pixel offsets
    disk_dv: np.ndarray,
    disk_x: np.ndarray,  # body-disk exact center offsets, meters
    disk_y: np.ndarray,
    sbar_deg: float,
    rbar: float,
    safety_only: bool,
    use_bounds: bool,
):
    """Orientation-sweep hazard scan (exact oracle / ALHAT-style baseline).

    Per pixel and orientation: leg elevations come from the footpad map, the
    landing plane from each CCW leg triple, slope from the plane normal, and
    roughness from the signed plane distance over the body-disk cells.

    Returns (max_slope_deg, max_rough, slope_safe, rough_safe, valid).  In
    ``safety_only`` mode the safe flags are exact but the metric rasters are
    only partial lower bounds (early exits).  ``use_bounds`` enables an
    exact branch-and-bound shortcut for the roughness cell loop; it never
    changes the result, only skips cell loops that cannot matter.
    """
    nrows, ncols = dem.shape
    ntheta, nlegs = leg_du.shape
    ntri = triples.shape[0]
    m_u = int(max(np.max(np.abs(leg_du)), np.max(np.abs(disk_du))))
    m_v = int(max(np.max(np.abs(leg_dv)), np.max(np.abs(disk_dv))))
    rho = float(np.max(np.hypot(disk_x, disk_y)))

    max_slope = np.full((nrows, ncols), np.nan)
    max_rough = np.full((nrows, ncols), np.nan)
    slope_safe = np.zeros((nrows, ncols), dtype=np.uint8)
    rough_safe = np.zeros((nrows, ncols), dtype=np.uint8)
    valid = np.zeros((nrows, ncols), dtype=np.uint8)
    if nrows - 2 * m_v <= 0 or ncols - 2 * m_u <= 0:
        return max_slope, max_rough, slope_safe, rough_safe, valid

    disk_flat = disk_dv * ncols + disk_du

    if use_bounds:
        zmax_disk, arg_x, arg_y, disk_ok = disk_max_arg(dem, disk_du, disk_dv, disk_x, disk_y)

    dem_flat = dem.ravel()
    for v0 in range(m_v, nrows - m_v):
        base = v0 * ncols
        for u0 in range(m_u, ncols - m_u):
            idx = base + u0
            zdisk = dem_flat[idx + disk_flat]
            if not np.all(np.isfinite(zdisk)):
                continue
            s_max = 0.0
            r_max = -np.inf
            s_unsafe = False
            r_unsafe = False
            bad = False
            if use_bounds:
                zd = zmax_disk[v0, u0]
                zd_x = arg_x[v0, u0]
                zd_y = arg_y[v0, u0]
                if not disk_ok[v0, u0]:
                    continue
            for t in range(ntheta):
                zl = np.empty(nlegs)
                for l in range(nlegs):
                    z = padmax[v0 + leg_dv[t, l], u0 + leg_du[t, l]]
                    if not math.isfinite(z):
                        bad = True
                        break
                    zl[l] = z
                if bad:
                    break
                for q in range(ntri):
                    i1, i2, i3 = triples[q]
                    x1, y1, z1 = leg_x[t, i1], leg_y[t, i1], zl[i1]
                    x2, y2, z2 = leg_x[t, i2], leg_y[t, i2], zl[i2]
                    x3, y3, z3 = leg_x[t, i3], leg_y[t, i3], zl[i3]
                    a = (y2 - y1) * (z3 - z1) - (z2 - z1) * (y3 - y1)
                    b = (z2 - z1) * (x3 - x1) - (x2 - x1) * (z3 - z1)
                    c = (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1)
                    inv_n = 1.0 / math.sqrt(a * a + b * b + c * c)
                    if not (s_unsafe and safety_only):
                        slope = math.degrees(math.acos(min(1.0, c * inv_n)))
                        if slope > s_max:
                            s_max = slope
                        if slope >= sbar_deg:
                            s_unsafe = True
                    if r_unsafe and safety_only:
                        if s_unsafe:
                            break
                        continue
                    d = -(a * x1 + b * y1 + c * z1)
                    if use_bounds:
                        r_arg = (a * zd_x + b * zd_y + c * zd + d) * inv_n
                        if r_arg > r_max:
                            r_max = r_arg
                        if r_max >= rbar:
                            r_unsafe = True
                            if safety_only:
                                if s_unsafe:
                                    break
                                continue
                        ub = (rho * math.hypot(a, b) + c * zd + d) * inv_n
                        if safety_only:
                            if ub < rbar or r_unsafe:
                                continue
                        elif ub <= r_max:
                            continue
                    r_tri = np.max((a * disk_x + b * disk_y + c * zdisk + d) * inv_n)
                    if r_tri > r_max:
                        r_max = r_tri
                    if r_max >= rbar:
                        r_unsafe = True
                if safety_only and s_unsafe and r_unsafe:
                    break
            if bad:
                continue
            valid[v0, u0] = 1
            max_slope[v0, u0] = s_max
            max_rough[v0, u0] = r_max if np.isfinite(r_max) else 0.0
            slope_safe[v0, u0] = 0 if s_unsafe else 1
            rough_safe[v0, u0] = 0 if r_unsafe else 1
    return max_slope, max_rough, slope_safe, rough_safe, valid


# ---------------------------------------------------------------------------
# Triangulation rasterization and local GRF fill
# ---------------------------------------------------------------------------


def _edge_tests(px, py, tris, t):
    """Canonical edge data for triangle t: per edge (start, vector, sign,
    traversal direction).  Edge e joins local vertices (e+1)%3 and (e+2)%3
    (opposite local vertex e, matching the neighbor convention)."""
    out = []
    for e in range(3):
        i = int(tris[t, (e + 1) % 3])
        j = int(tris[t, (e + 2) % 3])
        if i < j:
            s = 1.0
            sx, sy = px[i], py[i]
            vx, vy = px[j] - px[i], py[j] - py[i]
        else:
            s = -1.0
            sx, sy = px[j], py[j]
            vx, vy = px[i] - px[j], py[i] - py[j]
        dx, dy = s * vx, s * vy  # triangle's own traversal direction
        out.append((sx, sy, vx, vy, s, dx, dy))
    return out


def _owns_boundary(dx: float, dy: float) -> bool:
    # Top-left rule (y up): boundary pixels belong to the triangle whose
    # traversal direction goes up, or exactly left along a horizontal edge.
    return dy > 0 or (dy == 0 and dx < 0)


def rasterize_triangulation(
    px: np.ndarray,
    py: np.ndarray,
    tris: np.ndarray,
    neighbors: np.ndarray,
    ox: float,
    oy: float,
    cell_size: float,
    ncols: int,
    nrows: int,
):
    """Assign each covered cell center to exactly one triangle.

    Cells strictly inside a triangle belong to it; cells exactly on a shared
    edge go to the top-left owner; cells on hull edges are kept closed.
    Returns (owner int32 map, claim-count uint8 map); owner is -1 where no
    triangle claims the cell, first claim wins on degenerate double-claims.
    """
    owner = np.full((nrows, ncols), -1, dtype=np.int32)
    claims = np.zeros((nrows, ncols), dtype=np.uint8)
    for t in range(tris.shape[0]):
        ia, ib, ic = tris[t]
        xs = (px[ia], px[ib], px[ic])
        ys = (py[ia], py[ib], py[ic])
        v_lo = max(0, int(math.ceil((min(ys) - oy) / cell_size - 0.5)))
        v_hi = min(nrows - 1, int(math.floor((max(ys) - oy) / cell_size - 0.5)))
        u_lo = max(0, int(math.ceil((min(xs) - ox) / cell_size - 0.5)))
        u_hi = min(ncols - 1, int(math.floor((max(xs) - ox) / cell_size - 0.5)))
        if v_lo > v_hi or u_lo > u_hi:
            continue
        edges = _edge_tests(px, py, tris, t)
        hull = [neighbors[t, e] < 0 for e in range(3)]
        uu = ox + (np.arange(u_lo, u_hi + 1) + 0.5) * cell_size
        for v in range(v_lo, v_hi + 1):
            yc = oy + (v + 0.5) * cell_size
            inside = np.ones(len(uu), dtype=bool)
            for e, (sx, sy, vx, vy, s, dx, dy) in enumerate(edges):
                w = s * (vx * (yc - sy) - vy * (uu - sx))
                on_edge = w == 0
                ok_edge = (w > 0) | (on_edge & (hull[e] or _owns_boundary(dx, dy)))
                inside &= ok_edge
            for u in np.nonzero(inside)[0]:
                col = u_lo + int(u)
                claims[v, col] += 1
                if owner[v, col] < 0:
                    owner[v, col] = t
    return owner, claims


def grf_fill_cells(
    px: np.ndarray,
    py: np.ndarray,
    pz: np.ndarray,
    tris: np.ndarray,
    owner: np.ndarray,
    seeded: np.ndarray,
    ox: float,
    oy: float,
    cell_size: float,
    sigma_f: float,
    ell: float,
    sigma_eps: float,
    center_mean: bool,
    mean_out: np.ndarray,
    var_out: np.ndarray,
) -> None:
    """Fill unseeded owned cells with the 3-point local GRF prediction."""
    nrows, ncols = owner.shape
    sf2 = sigma_f * sigma_f
    se2 = sigma_eps * sigma_eps
    ntri = tris.shape[0]
    # Per-triangle precomputation: inverse of K + se2*I and the weight vector.
    w_all = np.zeros((ntri, 3))
    kin_all = np.zeros((ntri, 6))  # i11, i22, i33, i12, i13, i23
    mb_all = np.zeros(ntri)
    vx_all = np.zeros((ntri, 3))
    vy_all = np.zeros((ntri, 3))
    for t in range(ntri):
        i1, i2, i3 = tris[t]
        x = np.array([px[i1], px[i2], px[i3]])
        y = np.array([py[i1], py[i2], py[i3]])
        z = np.array([pz[i1], pz[i2], pz[i3]])
        vx_all[t] = x
        vy_all[t] = y
        mb = z.mean() if center_mean else 0.0
        mb_all[t] = mb
        if sf2 == 0.0:
            continue
        k12 = sf2 * math.exp(-math.hypot(x[0] - x[1], y[0] - y[1]) / ell)
        k13 = sf2 * math.exp(-math.hypot(x[0] - x[2], y[0] - y[2]) / ell)
        k23 = sf2 * math.exp(-math.hypot(x[1] - x[2], y[1] - y[2]) / ell)
        a = sf2 + se2
        det = a * (a * a - k23 * k23) - k12 * (k12 * a - k23 * k13) + k13 * (k12 * k23 - a * k13)
        i11 = (a * a - k23 * k23) / det
        i12 = (k13 * k23 - k12 * a) / det
        i13 = (k12 * k23 - a * k13) / det
        i22 = (a * a - k13 * k13) / det
        i23 = (k13 * k12 - a * k23) / det
        i33 = (a * a - k12 * k12) / det
        zc = z - mb
        w_all[t, 0] = i11 * zc[0] + i12 * zc[1] + i13 * zc[2]
        w_all[t, 1] = i12 * zc[0] + i22 * zc[1] + i23 * zc[2]
        w_all[t, 2] = i13 * zc[0] + i23 * zc[1] + i33 * zc[2]
        kin_all[t] = (i11, i22, i33, i12, i13, i23)
    for v in range(nrows):
        yc = oy + (v + 0.5) * cell_size
        for u in range(ncols):
            t = owner[v, u]
            if t < 0 or seeded[v, u]:
                continue
            xc = ox + (u + 0.5) * cell_size
            if sf2 == 0.0:
                mean_out[v, u] = mb_all[t]
                var_out[v, u] = 0.0
                continue
            k1 = sf2 * math.exp(-math.hypot(xc - vx_all[t, 0], yc - vy_all[t, 0]) / ell)
            k2 = sf2 * math.exp(-math.hypot(xc - vx_all[t, 1], yc - vy_all[t, 1]) / ell)
            k3 = sf2 * math.exp(-math.hypot(xc - vx_all[t, 2], yc - vy_all[t, 2]) / ell)
            mean_out[v, u] = k1 * w_all[t, 0] + k2 * w_all[t, 1] + k3 * w_all[t, 2] + mb_all[t]
            i11, i22, i33, i12, i13, i23 = kin_all[t]
            q = (
                k1 * k1 * i11
                + k2 * k2 * i22
                + k3 * k3 * i33
                + 2.0 * (k1 * k2 * i12 + k1 * k3 * i13 + k2 * k3 * i23)
            )
            var_out[v, u] = max(0.0, sf2 - q)
