# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the hot raster loops.

Mirrors ``_py.py`` function for function; selected automatically at import
when available.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport acos, ceil, exp, floor, hypot, sqrt

cnp.import_array()

BACKEND = "cython"

cdef double NAN = float("nan")
cdef double INF = float("inf")
# Same expression CPython's math.degrees evaluates, for bit-identical output.
cdef double RAD2DEG = 180.0 / 3.14159265358979323846


def footpad_max(double[:, ::1] values, long[::1] du, long[::1] dv):
    cdef Py_ssize_t nrows = values.shape[0], ncols = values.shape[1]
    cdef Py_ssize_t n = du.shape[0]
    out_arr = np.full((nrows, ncols), np.nan)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t v, u, k, vv, uu
    cdef double best, z
    cdef bint seen
    for v in range(nrows):
        for u in range(ncols):
            best = -INF
            seen = False
            for k in range(n):
                vv = v + dv[k]
                uu = u + du[k]
                if vv < 0 or vv >= nrows or uu < 0 or uu >= ncols:
                    continue
                z = values[vv, uu]
                if z != z:
                    continue
                seen = True
                if z > best:
                    best = z
            if seen:
                out[v, u] = best
    return out_arr


def mask_extremes(double[:, ::1] values, long[::1] du, long[::1] dv):
    cdef Py_ssize_t nrows = values.shape[0], ncols = values.shape[1]
    cdef Py_ssize_t n = du.shape[0]
    cdef Py_ssize_t mu = 0, mv = 0, k
    for k in range(n):
        if du[k] > mu: mu = du[k]
        if -du[k] > mu: mu = -du[k]
        if dv[k] > mv: mv = dv[k]
        if -dv[k] > mv: mv = -dv[k]
    vmax_arr = np.full((nrows, ncols), np.nan)
    vmin_arr = np.full((nrows, ncols), np.nan)
    valid_arr = np.zeros((nrows, ncols), dtype=np.uint8)
    cdef double[:, ::1] vmax = vmax_arr
    cdef double[:, ::1] vmin = vmin_arr
    cdef unsigned char[:, ::1] valid = valid_arr
    if nrows - 2 * mv <= 0 or ncols - 2 * mu <= 0 or n == 0:
        return vmax_arr, vmin_arr, valid_arr
    cdef Py_ssize_t v, u
    cdef double hi, lo, z
    cdef bint bad
    for v in range(mv, nrows - mv):
        for u in range(mu, ncols - mu):
            hi = -INF
            lo = INF
            bad = False
            for k in range(n):
                z = values[v + dv[k], u + du[k]]
                if z != z:
                    bad = True
                    break
                if z > hi: hi = z
                if z < lo: lo = z
            if not bad:
                vmax[v, u] = hi
                vmin[v, u] = lo
                valid[v, u] = 1
    return vmax_arr, vmin_arr, valid_arr


def mask_extremes_gauss3(double[:, ::1] mean, double[:, ::1] sd, long[::1] du, long[::1] dv):
    cdef Py_ssize_t nrows = mean.shape[0], ncols = mean.shape[1]
    cdef Py_ssize_t n = du.shape[0]
    cdef Py_ssize_t mu_off = 0, mv_off = 0, k
    for k in range(n):
        if du[k] > mu_off: mu_off = du[k]
        if -du[k] > mu_off: mu_off = -du[k]
        if dv[k] > mv_off: mv_off = dv[k]
        if -dv[k] > mv_off: mv_off = -dv[k]
    mu_max_arr = np.full((nrows, ncols), np.nan)
    sg_max_arr = np.full((nrows, ncols), np.nan)
    mu_min_arr = np.full((nrows, ncols), np.nan)
    sg_min_arr = np.full((nrows, ncols), np.nan)
    valid_arr = np.zeros((nrows, ncols), dtype=np.uint8)
    cdef double[:, ::1] mu_max = mu_max_arr
    cdef double[:, ::1] sg_max = sg_max_arr
    cdef double[:, ::1] mu_min = mu_min_arr
    cdef double[:, ::1] sg_min = sg_min_arr
    cdef unsigned char[:, ::1] valid = valid_arr
    if nrows - 2 * mv_off <= 0 or ncols - 2 * mu_off <= 0 or n == 0:
        return mu_max_arr, sg_max_arr, mu_min_arr, sg_min_arr, valid_arr
    cdef Py_ssize_t v, u
    cdef double hi_max, lo_max, hi_min, lo_min, m, s, hi, lo
    cdef bint bad
    for v in range(mv_off, nrows - mv_off):
        for u in range(mu_off, ncols - mu_off):
            hi_max = -INF
            lo_max = -INF
            hi_min = INF
            lo_min = INF
            bad = False
            for k in range(n):
                m = mean[v + dv[k], u + du[k]]
                s = sd[v + dv[k], u + du[k]]
                if m != m or s != s:
                    bad = True
                    break
                hi = m + 3.0 * s
                lo = m - 3.0 * s
                if hi > hi_max: hi_max = hi
                if lo > lo_max: lo_max = lo
                if hi < hi_min: hi_min = hi
                if lo < lo_min: lo_min = lo
            if not bad:
                mu_max[v, u] = 0.5 * (hi_max + lo_max)
                sg_max[v, u] = (hi_max - lo_max) / 6.0
                mu_min[v, u] = 0.5 * (hi_min + lo_min)
                sg_min[v, u] = (hi_min - lo_min) / 6.0
                valid[v, u] = 1
    return mu_max_arr, sg_max_arr, mu_min_arr, sg_min_arr, valid_arr


def disk_max_arg(double[:, ::1] values, long[::1] du, long[::1] dv, double[::1] dx, double[::1] dy):
    cdef Py_ssize_t nrows = values.shape[0], ncols = values.shape[1]
    cdef Py_ssize_t n = du.shape[0]
    cdef Py_ssize_t mu = 0, mv = 0, k
    for k in range(n):
        if du[k] > mu: mu = du[k]
        if -du[k] > mu: mu = -du[k]
        if dv[k] > mv: mv = dv[k]
        if -dv[k] > mv: mv = -dv[k]
    zmax_arr = np.full((nrows, ncols), np.nan)
    ax_arr = np.zeros((nrows, ncols))
    ay_arr = np.zeros((nrows, ncols))
    valid_arr = np.zeros((nrows, ncols), dtype=np.uint8)
    cdef double[:, ::1] zmax = zmax_arr
    cdef double[:, ::1] ax = ax_arr
    cdef double[:, ::1] ay = ay_arr
    cdef unsigned char[:, ::1] valid = valid_arr
    if nrows - 2 * mv <= 0 or ncols - 2 * mu <= 0 or n == 0:
        return zmax_arr, ax_arr, ay_arr, valid_arr
    cdef Py_ssize_t v, u
    cdef double best, bx, by, z
    cdef bint bad
    for v in range(mv, nrows - mv):
        for u in range(mu, ncols - mu):
            best = -INF
            bx = 0.0
            by = 0.0
            bad = False
            for k in range(n):
                z = values[v + dv[k], u + du[k]]
                if z != z:
                    bad = True
                    break
                if z > best:
                    best = z
                    bx = dx[k]
                    by = dy[k]
            if not bad:
                zmax[v, u] = best
                ax[v, u] = bx
                ay[v, u] = by
                valid[v, u] = 1
    return zmax_arr, ax_arr, ay_arr, valid_arr


def exact_scan(
    double[:, ::1] dem,
    double[:, ::1] padmax,
    double cell_size,
    long[:, ::1] leg_du,
    long[:, ::1] leg_dv,
    double[:, ::1] leg_x,
    double[:, ::1] leg_y,
    long[:, ::1] triples,
    long[::1] disk_du,
    long[::1] disk_dv,
    double[::1] disk_x,
    double[::1] disk_y,
    double sbar_deg,
    double rbar,
    bint safety_only,
    bint use_bounds,
):
    cdef Py_ssize_t nrows = dem.shape[0], ncols = dem.shape[1]
    cdef Py_ssize_t ntheta = leg_du.shape[0], nlegs = leg_du.shape[1]
    cdef Py_ssize_t ntri = triples.shape[0]
    cdef Py_ssize_t ncell = disk_du.shape[0]
    if nlegs > 16:
        raise ValueError("at most 16 legs supported")
    cdef Py_ssize_t m_u = 0, m_v = 0, k, t, l, q, g
    for t in range(ntheta):
        for l in range(nlegs):
            if leg_du[t, l] > m_u: m_u = leg_du[t, l]
            if -leg_du[t, l] > m_u: m_u = -leg_du[t, l]
            if leg_dv[t, l] > m_v: m_v = leg_dv[t, l]
            if -leg_dv[t, l] > m_v: m_v = -leg_dv[t, l]
    for k in range(ncell):
        if disk_du[k] > m_u: m_u = disk_du[k]
        if -disk_du[k] > m_u: m_u = -disk_du[k]
        if disk_dv[k] > m_v: m_v = disk_dv[k]
        if -disk_dv[k] > m_v: m_v = -disk_dv[k]
    cdef double rho = 0.0, h
    for k in range(ncell):
        h = hypot(disk_x[k], disk_y[k])
        if h > rho: rho = h

    max_slope_arr = np.full((nrows, ncols), np.nan)
    max_rough_arr = np.full((nrows, ncols), np.nan)
    slope_safe_arr = np.zeros((nrows, ncols), dtype=np.uint8)
    rough_safe_arr = np.zeros((nrows, ncols), dtype=np.uint8)
    valid_arr = np.zeros((nrows, ncols), dtype=np.uint8)
    cdef double[:, ::1] max_slope = max_slope_arr
    cdef double[:, ::1] max_rough = max_rough_arr
    cdef unsigned char[:, ::1] slope_safe = slope_safe_arr
    cdef unsigned char[:, ::1] rough_safe = rough_safe_arr
    cdef unsigned char[:, ::1] valid = valid_arr
    if nrows - 2 * m_v <= 0 or ncols - 2 * m_u <= 0:
        return max_slope_arr, max_rough_arr, slope_safe_arr, rough_safe_arr, valid_arr

    cdef double[:, ::1] zmax_disk
    cdef double[:, ::1] arg_x
    cdef double[:, ::1] arg_y
    cdef unsigned char[:, ::1] disk_ok
    if use_bounds:
        zmax_arr, ax_arr, ay_arr, ok_arr = disk_max_arg(
            np.asarray(dem), np.asarray(disk_du), np.asarray(disk_dv), np.asarray(disk_x), np.asarray(disk_y)
        )
        zmax_disk = zmax_arr
        arg_x = ax_arr
        arg_y = ay_arr
        disk_ok = ok_arr

    cdef Py_ssize_t v0, u0, i1, i2, i3
    cdef double zl[16]
    cdef double s_max, r_max, z, zd, zd_x, zd_y
    cdef double x1, y1, z1, x2, y2, z2, x3, y3, z3
    cdef double a, b, c, inv_n, slope, d, r_arg, ub, r, val
    cdef bint s_unsafe, r_unsafe, bad, skip_cells
    for v0 in range(m_v, nrows - m_v):
        for u0 in range(m_u, ncols - m_u):
            bad = False
            if use_bounds:
                if not disk_ok[v0, u0]:
                    continue
                zd = zmax_disk[v0, u0]
                zd_x = arg_x[v0, u0]
                zd_y = arg_y[v0, u0]
            else:
                for k in range(ncell):
                    z = dem[v0 + disk_dv[k], u0 + disk_du[k]]
                    if z != z:
                        bad = True
                        break
                if bad:
                    continue
            s_max = 0.0
            r_max = -INF
            s_unsafe = False
            r_unsafe = False
            for t in range(ntheta):
                for l in range(nlegs):
                    z = padmax[v0 + leg_dv[t, l], u0 + leg_du[t, l]]
                    if z != z:
                        bad = True
                        break
                    zl[l] = z
                if bad:
                    break
                for q in range(ntri):
                    i1 = triples[q, 0]
                    i2 = triples[q, 1]
                    i3 = triples[q, 2]
                    x1 = leg_x[t, i1]; y1 = leg_y[t, i1]; z1 = zl[i1]
                    x2 = leg_x[t, i2]; y2 = leg_y[t, i2]; z2 = zl[i2]
                    x3 = leg_x[t, i3]; y3 = leg_y[t, i3]; z3 = zl[i3]
                    a = (y2 - y1) * (z3 - z1) - (z2 - z1) * (y3 - y1)
                    b = (z2 - z1) * (x3 - x1) - (x2 - x1) * (z3 - z1)
                    c = (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1)
                    inv_n = 1.0 / sqrt(a * a + b * b + c * c)
                    if not (s_unsafe and safety_only):
                        val = c * inv_n
                        if val > 1.0:
                            val = 1.0
                        slope = acos(val) * RAD2DEG
                        if slope > s_max:
                            s_max = slope
                        if slope >= sbar_deg:
                            s_unsafe = True
                    if r_unsafe and safety_only:
                        if s_unsafe:
                            break
                        continue
                    d = -(a * x1 + b * y1 + c * z1)
                    skip_cells = False
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
                        ub = (rho * hypot(a, b) + c * zd + d) * inv_n
                        if safety_only:
                            if ub < rbar or r_unsafe:
                                skip_cells = True
                        elif ub <= r_max:
                            skip_cells = True
                    if skip_cells:
                        continue
                    for g in range(ncell):
                        z = dem[v0 + disk_dv[g], u0 + disk_du[g]]
                        r = (a * disk_x[g] + b * disk_y[g] + c * z + d) * inv_n
                        if r > r_max:
                            r_max = r
                            if r_max >= rbar:
                                r_unsafe = True
                                if safety_only:
                                    break
                if safety_only and s_unsafe and r_unsafe:
                    break
            if bad:
                continue
            valid[v0, u0] = 1
            max_slope[v0, u0] = s_max
            max_rough[v0, u0] = r_max if r_max > -INF else 0.0
            slope_safe[v0, u0] = 0 if s_unsafe else 1
            rough_safe[v0, u0] = 0 if r_unsafe else 1
    return max_slope_arr, max_rough_arr, slope_safe_arr, rough_safe_arr, valid_arr


# ---------------------------------------------------------------------------
# Triangulation rasterization and local GRF fill
# ---------------------------------------------------------------------------


def rasterize_triangulation(
    double[::1] px,
    double[::1] py,
    long[:, ::1] tris,
    long[:, ::1] neighbors,
    double ox,
    double oy,
    double cell_size,
    Py_ssize_t ncols,
    Py_ssize_t nrows,
):
    owner_arr = np.full((nrows, ncols), -1, dtype=np.int32)
    claims_arr = np.zeros((nrows, ncols), dtype=np.uint8)
    cdef int[:, ::1] owner = owner_arr
    cdef unsigned char[:, ::1] claims = claims_arr
    cdef Py_ssize_t ntri = tris.shape[0]
    cdef Py_ssize_t t, e, i, j, v, u
    cdef Py_ssize_t v_lo, v_hi, u_lo, u_hi
    cdef double xs0, xs1, xs2, ys0, ys1, ys2, xmin, xmax, ymin, ymax
    cdef double sx[3]
    cdef double sy[3]
    cdef double vx[3]
    cdef double vy[3]
    cdef double sgn[3]
    cdef double ddx[3]
    cdef double ddy[3]
    cdef bint hull[3]
    cdef bint owns[3]
    cdef double yc, xc, w
    cdef bint inside
    for t in range(ntri):
        xs0 = px[tris[t, 0]]; ys0 = py[tris[t, 0]]
        xs1 = px[tris[t, 1]]; ys1 = py[tris[t, 1]]
        xs2 = px[tris[t, 2]]; ys2 = py[tris[t, 2]]
        xmin = min(xs0, min(xs1, xs2)); xmax = max(xs0, max(xs1, xs2))
        ymin = min(ys0, min(ys1, ys2)); ymax = max(ys0, max(ys1, ys2))
        v_lo = <Py_ssize_t>ceil((ymin - oy) / cell_size - 0.5)
        v_hi = <Py_ssize_t>floor((ymax - oy) / cell_size - 0.5)
        u_lo = <Py_ssize_t>ceil((xmin - ox) / cell_size - 0.5)
        u_hi = <Py_ssize_t>floor((xmax - ox) / cell_size - 0.5)
        if v_lo < 0: v_lo = 0
        if u_lo < 0: u_lo = 0
        if v_hi > nrows - 1: v_hi = nrows - 1
        if u_hi > ncols - 1: u_hi = ncols - 1
        if v_lo > v_hi or u_lo > u_hi:
            continue
        for e in range(3):
            i = tris[t, (e + 1) % 3]
            j = tris[t, (e + 2) % 3]
            if i < j:
                sgn[e] = 1.0
                sx[e] = px[i]; sy[e] = py[i]
                vx[e] = px[j] - px[i]; vy[e] = py[j] - py[i]
            else:
                sgn[e] = -1.0
                sx[e] = px[j]; sy[e] = py[j]
                vx[e] = px[i] - px[j]; vy[e] = py[i] - py[j]
            ddx[e] = sgn[e] * vx[e]
            ddy[e] = sgn[e] * vy[e]
            hull[e] = neighbors[t, e] < 0
            owns[e] = hull[e] or ddy[e] > 0 or (ddy[e] == 0 and ddx[e] < 0)
        for v in range(v_lo, v_hi + 1):
            yc = oy + (v + 0.5) * cell_size
            for u in range(u_lo, u_hi + 1):
                xc = ox + (u + 0.5) * cell_size
                inside = True
                for e in range(3):
                    w = sgn[e] * (vx[e] * (yc - sy[e]) - vy[e] * (xc - sx[e]))
                    if w < 0 or (w == 0 and not owns[e]):
                        inside = False
                        break
                if inside:
                    if claims[v, u] < 255:
                        claims[v, u] += 1
                    if owner[v, u] < 0:
                        owner[v, u] = t
    return owner_arr, claims_arr


def grf_fill_cells(
    double[::1] px,
    double[::1] py,
    double[::1] pz,
    long[:, ::1] tris,
    int[:, ::1] owner,
    unsigned char[:, ::1] seeded,
    double ox,
    double oy,
    double cell_size,
    double sigma_f,
    double ell,
    double sigma_eps,
    bint center_mean,
    double[:, ::1] mean_out,
    double[:, ::1] var_out,
):
    cdef Py_ssize_t nrows = owner.shape[0], ncols = owner.shape[1]
    cdef Py_ssize_t ntri = tris.shape[0]
    cdef double sf2 = sigma_f * sigma_f
    cdef double se2 = sigma_eps * sigma_eps
    w_arr = np.zeros((ntri, 3))
    kin_arr = np.zeros((ntri, 6))
    mb_arr = np.zeros(ntri)
    vx_arr = np.zeros((ntri, 3))
    vy_arr = np.zeros((ntri, 3))
    cdef double[:, ::1] w_all = w_arr
    cdef double[:, ::1] kin = kin_arr
    cdef double[::1] mb_all = mb_arr
    cdef double[:, ::1] vx = vx_arr
    cdef double[:, ::1] vy = vy_arr
    cdef Py_ssize_t t, v, u
    cdef Py_ssize_t i1, i2, i3
    cdef double x1, y1, z1, x2, y2, z2, x3, y3, z3, mb
    cdef double k12, k13, k23, a, det
    cdef double i11, i12, i13, i22, i23, i33
    cdef double zc1, zc2, zc3, yc, xc, k1, k2, k3, q, var
    for t in range(ntri):
        i1 = tris[t, 0]; i2 = tris[t, 1]; i3 = tris[t, 2]
        x1 = px[i1]; y1 = py[i1]; z1 = pz[i1]
        x2 = px[i2]; y2 = py[i2]; z2 = pz[i2]
        x3 = px[i3]; y3 = py[i3]; z3 = pz[i3]
        vx[t, 0] = x1; vx[t, 1] = x2; vx[t, 2] = x3
        vy[t, 0] = y1; vy[t, 1] = y2; vy[t, 2] = y3
        mb = (z1 + z2 + z3) / 3.0 if center_mean else 0.0
        mb_all[t] = mb
        if sf2 == 0.0:
            continue
        k12 = sf2 * exp(-hypot(x1 - x2, y1 - y2) / ell)
        k13 = sf2 * exp(-hypot(x1 - x3, y1 - y3) / ell)
        k23 = sf2 * exp(-hypot(x2 - x3, y2 - y3) / ell)
        a = sf2 + se2
        det = a * (a * a - k23 * k23) - k12 * (k12 * a - k23 * k13) + k13 * (k12 * k23 - a * k13)
        i11 = (a * a - k23 * k23) / det
        i12 = (k13 * k23 - k12 * a) / det
        i13 = (k12 * k23 - a * k13) / det
        i22 = (a * a - k13 * k13) / det
        i23 = (k13 * k12 - a * k23) / det
        i33 = (a * a - k12 * k12) / det
        zc1 = z1 - mb; zc2 = z2 - mb; zc3 = z3 - mb
        w_all[t, 0] = i11 * zc1 + i12 * zc2 + i13 * zc3
        w_all[t, 1] = i12 * zc1 + i22 * zc2 + i23 * zc3
        w_all[t, 2] = i13 * zc1 + i23 * zc2 + i33 * zc3
        kin[t, 0] = i11; kin[t, 1] = i22; kin[t, 2] = i33
        kin[t, 3] = i12; kin[t, 4] = i13; kin[t, 5] = i23
    cdef int tt
    for v in range(nrows):
        yc = oy + (v + 0.5) * cell_size
        for u in range(ncols):
            tt = owner[v, u]
            if tt < 0 or seeded[v, u]:
                continue
            xc = ox + (u + 0.5) * cell_size
            if sf2 == 0.0:
                mean_out[v, u] = mb_all[tt]
                var_out[v, u] = 0.0
                continue
            k1 = sf2 * exp(-hypot(xc - vx[tt, 0], yc - vy[tt, 0]) / ell)
            k2 = sf2 * exp(-hypot(xc - vx[tt, 1], yc - vy[tt, 1]) / ell)
            k3 = sf2 * exp(-hypot(xc - vx[tt, 2], yc - vy[tt, 2]) / ell)
            mean_out[v, u] = k1 * w_all[tt, 0] + k2 * w_all[tt, 1] + k3 * w_all[tt, 2] + mb_all[tt]
            q = (
                k1 * k1 * kin[tt, 0]
                + k2 * k2 * kin[tt, 1]
                + k3 * k3 * kin[tt, 2]
                + 2.0 * (k1 * k2 * kin[tt, 3] + k1 * k3 * kin[tt, 4] + k2 * k3 * kin[tt, 5])
            )
            var = sf2 - q
            if var < 0.0:
                var = 0.0
            var_out[v, u] = var
