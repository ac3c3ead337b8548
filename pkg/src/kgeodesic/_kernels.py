"""Compiled kernels: profile evaluation, the geodesic vector field and a
Dormand-Prince 5(4) integrator with event polishing.

Everything here works on plain arrays so numba can compile it.  The profile
is passed around as the tuple returned by ``ProfileCurve.packed``:

    (breaks, kind, x0, r0, phi0, curv, phi_poly, coef_x, coef_r, period)

Piece kinds:
    0  straight line            (x0, r0, phi0)
    1  circular arc             (x0, r0, phi0, curv = dphi/dt)
    2  polynomial tangent angle (phi_poly in x = s/len, Chebyshev x(s), r(s))
    3  tabulated Hermite piece  (power-basis coef_r (quintic), coef_x (cubic))
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp.rk import RK45

# Dormand-Prince 5(4) tableau, taken from scipy's RK45 so that the numbers
# are not retyped by hand.
_A = np.ascontiguousarray(RK45.A, dtype=np.float64)
_B = np.ascontiguousarray(RK45.B, dtype=np.float64)
_C = np.ascontiguousarray(RK45.C, dtype=np.float64)
_E = np.ascontiguousarray(RK45.E, dtype=np.float64)
_P = np.ascontiguousarray(RK45.P, dtype=np.float64)

FLAG_STEP = 0
FLAG_TURN = 1
FLAG_GP = 2
FLAG_START = 3
FLAG_BREAK = 4  # internal: step shortened to land on a profile breakpoint

STATUS_LENGTH = 0
STATUS_TURNS = 1
STATUS_GP = 2
STATUS_UNDERFLOW = -1
STATUS_FORBIDDEN = -2
STATUS_MAXSTEPS = -3


# --------------------------------------------------------------------------
# profile evaluation
# --------------------------------------------------------------------------

@njit(cache=True)
def _locate(t, breaks):
    npiece = breaks.shape[0] - 1
    if t <= breaks[0]:
        return 0
    if t >= breaks[npiece]:
        return npiece - 1
    lo = 0
    hi = npiece
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if breaks[mid] <= t:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def _clenshaw(c, y):
    b0 = 0.0
    b1 = 0.0
    for j in range(c.shape[0] - 1, 0, -1):
        b0, b1 = 2.0 * y * b0 - b1 + c[j], b0
    return y * b0 - b1 + c[0]


@njit(cache=True)
def profile_eval(t, prof):
    """Return (x, r, r', r'') at profile parameter ``t``."""
    breaks, kind, x0, r0, phi0, curv, phi_poly, coef_x, coef_r, period = prof
    if period > 0.0:
        t = t - math.floor((t - breaks[0]) / period) * period
    i = _locate(t, breaks)
    s = t - breaks[i]
    k = kind[i]
    if k == 0:
        cp = math.cos(phi0[i])
        sp = math.sin(phi0[i])
        return x0[i] + s * cp, r0[i] + s * sp, sp, 0.0
    if k == 1:
        kap = curv[i]
        ph = phi0[i] + kap * s
        sp = math.sin(ph)
        cp = math.cos(ph)
        x = x0[i] + (sp - math.sin(phi0[i])) / kap
        r = r0[i] - (cp - math.cos(phi0[i])) / kap
        return x, r, sp, kap * cp
    if k == 2:
        length = breaks[i + 1] - breaks[i]
        xx = s / length
        a = phi_poly[i]
        ph = a[0] + xx * (a[1] + xx * (a[2] + xx * (a[3] + xx * (a[4] + xx * a[5]))))
        dph = (a[1] + xx * (2.0 * a[2] + xx * (3.0 * a[3] + xx * (4.0 * a[4] + xx * 5.0 * a[5])))) / length
        y = 2.0 * xx - 1.0
        x = _clenshaw(coef_x[i], y)
        r = _clenshaw(coef_r[i], y)
        return x, r, math.sin(ph), dph * math.cos(ph)
    # kind 3: tabulated quintic/cubic Hermite piece in power basis
    cr = coef_r[i]
    cx = coef_x[i]
    r = cr[0] + s * (cr[1] + s * (cr[2] + s * (cr[3] + s * (cr[4] + s * cr[5]))))
    rp = cr[1] + s * (2.0 * cr[2] + s * (3.0 * cr[3] + s * (4.0 * cr[4] + s * 5.0 * cr[5])))
    rpp = 2.0 * cr[2] + s * (6.0 * cr[3] + s * (12.0 * cr[4] + s * 20.0 * cr[5]))
    x = cx[0] + s * (cx[1] + s * (cx[2] + s * cx[3]))
    return x, r, rp, rpp


@njit(cache=True)
def profile_eval_many(ts, prof):
    n = ts.shape[0]
    out = np.empty((n, 4))
    for j in range(n):
        x, r, rp, rpp = profile_eval(ts[j], prof)
        out[j, 0] = x
        out[j, 1] = r
        out[j, 2] = rp
        out[j, 3] = rpp
    return out


# --------------------------------------------------------------------------
# geodesic vector field, state y = (t, theta, u, v), u = dt/ds, v = dtheta/ds
# --------------------------------------------------------------------------

@njit(cache=True)
def rhs(y, prof, out):
    _, r, rp, _ = profile_eval(y[0], prof)
    u = y[2]
    v = y[3]
    out[0] = u
    out[1] = v
    out[2] = r * rp * v * v
    out[3] = -2.0 * rp * u * v / r


@njit(cache=True)
def _rk_step(y, f0, h, prof, K, ynew, fnew):
    """One Dormand-Prince step; fills K (7x4) and returns the error norm
    numerator vector in-place via K row 6 (f at ynew)."""
    tmp = np.empty(4)
    for j in range(4):
        K[0, j] = f0[j]
    for st in range(1, 6):
        for j in range(4):
            acc = 0.0
            for m in range(st):
                acc += _A[st, m] * K[m, j]
            tmp[j] = y[j] + h * acc
        kk = K[st]
        rhs(tmp, prof, kk)
    for j in range(4):
        acc = 0.0
        for m in range(6):
            acc += _B[m] * K[m, j]
        ynew[j] = y[j] + h * acc
    rhs(ynew, prof, fnew)
    for j in range(4):
        K[6, j] = fnew[j]


@njit(cache=True)
def _err_norm(y, ynew, K, h, rtol, atol):
    tot = 0.0
    for j in range(4):
        e = 0.0
        for m in range(7):
            e += _E[m] * K[m, j]
        e *= h
        if j == 1:
            # rotation angle accumulates without bound; control it absolutely
            sc = atol + rtol
        else:
            sc = atol + rtol * max(abs(y[j]), abs(ynew[j]))
        tot += (e / sc) ** 2
    return math.sqrt(tot / 4.0)


@njit(cache=True)
def _dense(y, K, h, sig, comp):
    # continuous extension: y + h * sum_i K_i * (P_i . [sig, sig^2, sig^3, sig^4])
    acc = 0.0
    for m in range(7):
        p = _P[m]
        w = sig * (p[0] + sig * (p[1] + sig * (p[2] + sig * p[3])))
        acc += K[m, comp] * w
    return y[comp] + h * acc


@njit(cache=True)
def _event_value(yv, kind, t_gp, period):
    if kind == FLAG_TURN:
        return yv[2]
    g = yv[0] - t_gp
    if period > 0.0:
        g = g - math.floor(g / period + 0.5) * period
    return g


@njit(cache=True)
def _locate_event(y, f0, K, h, kind, t_gp, period, prof, yev, fev):
    """Root of the event function inside (0, h]: bisection on the dense
    interpolant, then Newton polishing with fresh RK steps from y."""
    if kind == FLAG_TURN:
        comp = 2
    else:
        comp = 0
    g0 = y[comp] - (0.0 if kind == FLAG_TURN else t_gp)
    if kind != FLAG_TURN and period > 0.0:
        g0 = g0 - math.floor(g0 / period + 0.5) * period
    lo = 0.0
    hi = 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        gm = _dense(y, K, h, mid, comp) - (0.0 if kind == FLAG_TURN else t_gp)
        if kind != FLAG_TURN and period > 0.0:
            gm = gm - math.floor(gm / period + 0.5) * period
        if (gm > 0.0) == (g0 > 0.0) and gm != 0.0:
            lo = mid
        else:
            hi = mid
    hs = 0.5 * (lo + hi) * h
    Kt = np.empty((7, 4))
    dy = np.empty(4)
    for _ in range(6):
        _rk_step(y, f0, hs, prof, Kt, yev, fev)
        g = _event_value(yev, kind, t_gp, period)
        rhs(yev, prof, dy)
        if kind == FLAG_TURN:
            dg = dy[2]
        else:
            dg = dy[0]
        if dg == 0.0:
            break
        delta = g / dg
        hs -= delta
        if abs(delta) < 1e-15 * max(1.0, abs(hs)):
            break
    _rk_step(y, f0, hs, prof, Kt, yev, fev)
    return hs


@njit(cache=True)
def _grow(S, Y, F, n):
    cap = S.shape[0] * 2
    S2 = np.empty(cap)
    Y2 = np.empty((cap, 4))
    F2 = np.empty(cap, dtype=np.int64)
    S2[:n] = S[:n]
    Y2[:n] = Y[:n]
    F2[:n] = F[:n]
    return S2, Y2, F2


@njit(cache=True)
def integrate_kernel(prof, y0, max_length, rtol, atol, h_max, dtheta_max,
                     t_gp, stop_turns, stop_gp, record, max_steps):
    """Integrate from arc length 0 until ``max_length`` or until the
    requested number of turning / great-parallel events.

    Returns (S, Y, F, n, status, n_turn, n_gp).  When ``record`` is False
    only the start row and the final row are kept.
    """
    period = prof[9]
    breaks = prof[0]
    snap_breaks = period == 0.0 and breaks.shape[0] <= 66
    cap = 1024 if record else 4
    S = np.empty(cap)
    Y = np.empty((cap, 4))
    F = np.empty(cap, dtype=np.int64)
    n = 0
    y = y0.copy()
    s = 0.0
    S[0] = 0.0
    Y[0] = y
    F[0] = FLAG_START
    n = 1

    _, r0, _, _ = profile_eval(y[0], prof)
    c = r0 * r0 * y[3]
    f0 = np.empty(4)
    rhs(y, prof, f0)
    K = np.empty((7, 4))
    ynew = np.empty(4)
    fnew = np.empty(4)
    yev = np.empty(4)
    fev = np.empty(4)
    h = min(1e-3, h_max)
    n_turn = 0
    n_gp = 0
    status = STATUS_LENGTH
    steps = 0
    done = False
    while not done:
        if steps >= max_steps:
            status = STATUS_MAXSTEPS
            break
        steps += 1
        hh = min(h, h_max)
        if dtheta_max > 0.0 and y[3] != 0.0:
            hh = min(hh, dtheta_max / abs(y[3]))
        last = False
        if s + hh >= max_length:
            hh = max_length - s
            last = True
        if hh < 1e-14 * max(1.0, abs(s)):
            if last:
                break
            status = STATUS_UNDERFLOW
            break
        _rk_step(y, f0, hh, prof, K, ynew, fnew)
        err = _err_norm(y, ynew, K, hh, rtol, atol)
        if err > 1.0:
            h = hh * max(0.2, 0.9 * err ** (-0.2))
            continue
        # accepted step: check events (turning: u changes sign; gp crossing)
        ev_kind = -1
        ev_h = hh
        if y[2] != 0.0 and (ynew[2] == 0.0 or (ynew[2] > 0.0) != (y[2] > 0.0)):
            hs = _locate_event(y, f0, K, hh, FLAG_TURN, t_gp, period, prof, yev, fev)
            if hs <= ev_h:
                ev_kind = FLAG_TURN
                ev_h = hs
        g0 = _event_value(y, FLAG_GP, t_gp, period)
        g1 = _event_value(ynew, FLAG_GP, t_gp, period)
        jump = period > 0.0 and abs(g1 - g0) > 0.25 * period
        if g0 != 0.0 and (g1 == 0.0 or (g1 > 0.0) != (g0 > 0.0)) and not jump:
            ye2 = np.empty(4)
            fe2 = np.empty(4)
            hs = _locate_event(y, f0, K, hh, FLAG_GP, t_gp, period, prof, ye2, fe2)
            if ev_kind < 0 or hs < ev_h:
                ev_kind = FLAG_GP
                ev_h = hs
                yev[:] = ye2
                fev[:] = fe2
            # two events in one step: the later one is caught on the next
            # step because we restart from the event state below.
        # land on profile breakpoints so no step straddles a jump in the
        # higher derivatives of r (keeps the error estimate honest)
        if snap_breaks:
            i0 = _locate(y[0], breaks)
            i1 = _locate(ynew[0], breaks)
            if i0 != i1:
                bp = breaks[i0 + 1] if i1 > i0 else breaks[i0]
                b0 = y[0] - bp
                b1 = ynew[0] - bp
                if b0 != 0.0 and (b1 == 0.0 or (b1 > 0.0) != (b0 > 0.0)):
                    ye3 = np.empty(4)
                    fe3 = np.empty(4)
                    hs = _locate_event(y, f0, K, hh, FLAG_GP, bp, 0.0, prof, ye3, fe3)
                    if hs > 0.0 and (ev_kind < 0 or hs < ev_h):
                        ev_kind = FLAG_BREAK
                        ev_h = hs
                        yev[:] = ye3
                        fev[:] = fe3
        if ev_kind >= 0 and ev_h < hh * (1.0 - 1e-12):
            # restart from the event state so every stored row is exact
            ynew[:] = yev
            fnew[:] = fev
            hh = ev_h
            last = False
        elif ev_kind >= 0:
            ynew[:] = yev
            fnew[:] = fev
        s = s + hh
        y[:] = ynew
        f0[:] = fnew
        # forbidden region check (r < |c| is impossible for a geodesic)
        if c != 0.0:
            _, rr, _, _ = profile_eval(y[0], prof)
            if rr < abs(c) * (1.0 - 1e-7) - 1e-12:
                status = STATUS_FORBIDDEN
                done = True
        flag = FLAG_STEP
        if ev_kind >= 0 and ev_kind != FLAG_BREAK:
            flag = ev_kind
            if ev_kind == FLAG_TURN:
                n_turn += 1
                # snap exactly onto the turning parallel
                y[2] = 0.0
                rhs(y, prof, f0)
            else:
                n_gp += 1
                y[0] = y[0] - _event_value(y, FLAG_GP, t_gp, period)
                rhs(y, prof, f0)
        if record:
            if n >= S.shape[0]:
                S, Y, F = _grow(S, Y, F, n)
            S[n] = s
            Y[n] = y
            F[n] = flag
            n += 1
        else:
            S[1] = s
            Y[1] = y
            F[1] = flag
            n = 2
        if stop_turns > 0 and n_turn >= stop_turns:
            status = STATUS_TURNS
            break
        if stop_gp > 0 and n_gp >= stop_gp:
            status = STATUS_GP
            break
        if last:
            break
        if err == 0.0:
            fac = 10.0
        else:
            fac = min(10.0, max(0.2, 0.9 * err ** (-0.2)))
        h = hh * fac if ev_kind < 0 else max(h, hh)
    return S[:n], Y[:n], F[:n], n, status, n_turn, n_gp


@njit(cache=True)
def states_at(S, Y, queries, prof):
    """Exact states at arbitrary arc lengths: one RK step from the stored
    row preceding each query (stored rows are accepted-step states, so the
    step stays within the accepted step size)."""
    nq = queries.shape[0]
    out = np.empty((nq, 4))
    K = np.empty((7, 4))
    f0 = np.empty(4)
    fn = np.empty(4)
    yn = np.empty(4)
    ns = S.shape[0]
    for j in range(nq):
        q = queries[j]
        idx = np.searchsorted(S, q, side="right") - 1
        if idx < 0:
            idx = 0
        if idx > ns - 1:
            idx = ns - 1
        h = q - S[idx]
        y = Y[idx]
        if h == 0.0:
            out[j] = y
            continue
        rhs(y, prof, f0)
        _rk_step(y, f0, h, prof, K, yn, fn)
        out[j] = yn
    return out


# --------------------------------------------------------------------------
# polyline self-intersections on the (theta mod 2pi, t) cylinder
# --------------------------------------------------------------------------

@njit(cache=True)
def _seg_hit(ax, ay, bx, by, cx, cy, dx, dy):
    rx = bx - ax
    ry = by - ay
    sx = dx - cx
    sy = dy - cy
    den = rx * sy - ry * sx
    if den == 0.0:
        return -1.0, -1.0, 0.0
    qx = cx - ax
    qy = cy - ay
    lam = (qx * sy - qy * sx) / den
    mu = (qx * ry - qy * rx) / den
    nr = math.sqrt(rx * rx + ry * ry)
    ns = math.sqrt(sx * sx + sy * sy)
    sin_ang = abs(den) / (nr * ns) if nr * ns > 0.0 else 0.0
    return lam, mu, sin_ang


@njit(cache=True)
def polyline_crossings(th, tt, S, closed, cell_th, cell_t, max_sep, total_len):
    """All transverse crossings of the polyline (th unwrapped, tt) viewed on
    the cylinder th mod 2pi.  Returns an (m, 6) array of
    (i, j, lam_i, lam_j, sin_angle, shift) with i < j segment indices.

    ``max_sep`` > 0 restricts to pairs whose (cyclic, if closed) arc-length
    separation is at most max_sep.
    """
    twopi = 2.0 * math.pi
    npts = th.shape[0]
    nseg = npts - 1
    if closed:
        nseg = npts  # last segment joins back to the first point
    nct = max(1, int(math.floor(twopi / cell_th)))
    cth = twopi / nct
    tmin = tt.min()
    reg_cell = np.empty(nseg * 8, dtype=np.int64)
    reg_seg = np.empty(nseg * 8, dtype=np.int64)
    nreg = 0
    for i in range(nseg):
        j = i + 1 if i + 1 < npts else 0
        a0 = th[i] - math.floor(th[i] / twopi) * twopi
        a1 = a0 + (th[j] - th[i])
        if closed and j == 0:
            d = th[0] - th[i]
            d = d - math.floor(d / twopi + 0.5) * twopi
            a1 = a0 + d
        lo_th = min(a0, a1)
        hi_th = max(a0, a1)
        lo_t = min(tt[i], tt[j])
        hi_t = max(tt[i], tt[j])
        i0 = int(math.floor(lo_th / cth))
        i1 = int(math.floor(hi_th / cth))
        j0 = int(math.floor((lo_t - tmin) / cell_t))
        j1 = int(math.floor((hi_t - tmin) / cell_t))
        if i1 - i0 >= nct:
            i0 = 0
            i1 = nct - 1
        for ci in range(i0, i1 + 1):
            cim = ci % nct
            for cj in range(j0, j1 + 1):
                if nreg >= reg_cell.shape[0]:
                    rc = np.empty(reg_cell.shape[0] * 2, dtype=np.int64)
                    rs = np.empty(reg_cell.shape[0] * 2, dtype=np.int64)
                    rc[:nreg] = reg_cell[:nreg]
                    rs[:nreg] = reg_seg[:nreg]
                    reg_cell = rc
                    reg_seg = rs
                reg_cell[nreg] = cj * nct + cim
                reg_seg[nreg] = i
                nreg += 1
    order = np.argsort(reg_cell[:nreg], kind="mergesort")
    cells = reg_cell[:nreg][order]
    segs = reg_seg[:nreg][order]
    out = np.empty((64, 6))
    nout = 0
    start = 0
    while start < nreg:
        stop = start
        while stop < nreg and cells[stop] == cells[start]:
            stop += 1
        cell = cells[start]
        for p in range(start, stop):
            i = segs[p]
            for q in range(p + 1, stop):
                j = segs[q]
                a = min(i, j)
                b = max(i, j)
                if b - a <= 1:
                    continue
                if closed and a == 0 and b == nseg - 1:
                    continue
                if max_sep > 0.0:
                    sep = S[b] - S[a]
                    if closed:
                        sep = min(sep, total_len - sep)
                    if sep > max_sep:
                        continue
                a1i = a + 1 if a + 1 < npts else 0
                b1i = b + 1 if b + 1 < npts else 0
                ax = th[a]
                ay = tt[a]
                bx = th[a1i]
                by = tt[a1i]
                if a1i == 0:
                    d = th[0] - th[a]
                    bx = th[a] + d - math.floor(d / twopi + 0.5) * twopi
                cx = th[b]
                cy = tt[b]
                dx = th[b1i]
                dy = tt[b1i]
                if b1i == 0:
                    d = th[0] - th[b]
                    dx = th[b] + d - math.floor(d / twopi + 0.5) * twopi
                base = math.floor((cx - ax) / twopi + 0.5)
                for extra in (-1.0, 0.0, 1.0):
                    sh = (base + extra) * twopi
                    lam, mu, sang = _seg_hit(ax, ay, bx, by, cx - sh, cy, dx - sh, dy)
                    if lam < 0.0 or lam >= 1.0 or mu < 0.0 or mu >= 1.0:
                        continue
                    px = ax + lam * (bx - ax)
                    py = ay + lam * (by - ay)
                    pxm = px - math.floor(px / twopi) * twopi
                    ci = int(math.floor(pxm / cth)) % nct
                    cj = int(math.floor((py - tmin) / cell_t))
                    if cj * nct + ci != cell:
                        continue
                    if nout >= out.shape[0]:
                        o2 = np.empty((out.shape[0] * 2, 6))
                        o2[:nout] = out[:nout]
                        out = o2
                    out[nout, 0] = a
                    out[nout, 1] = b
                    out[nout, 2] = lam
                    out[nout, 3] = mu
                    out[nout, 4] = sang
                    out[nout, 5] = sh
                    nout += 1
        start = stop
    return out[:nout]


# --------------------------------------------------------------------------
# length of a chain of parameter segments, with its gradient
# --------------------------------------------------------------------------

@njit(cache=True)
def chain_length_grad(X, pole, prof, gx, gw):
    """Total length of the chain of straight (t, theta) segments through the
    rows of X and its gradient with respect to the rows.  Pole rows take the
    theta of their neighbour, so segments touching a pole are meridian arcs.
    Each segment is integrated piecewise between profile breakpoints."""
    breaks = prof[0]
    period = prof[9]
    m = X.shape[0]
    grad = np.zeros((m, 2))
    total = 0.0
    cuts = np.empty(breaks.shape[0] * 4 + 2)
    for i in range(m - 1):
        t0 = X[i, 0]
        t1 = X[i + 1, 0]
        th0 = X[i, 1]
        th1 = X[i + 1, 1]
        if pole[i]:
            th0 = th1
        if pole[i + 1]:
            th1 = th0
        dt = t1 - t0
        dth = th1 - th0
        nc = 0
        cuts[nc] = 0.0
        nc += 1
        if dt != 0.0:
            lo_t = min(t0, t1)
            hi_t = max(t0, t1)
            shifts = 0
            first = 0
            if period > 0.0:
                first = int(math.floor((lo_t - breaks[-1]) / period))
                shifts = int(math.floor((hi_t - breaks[0]) / period)) - first + 1
            else:
                shifts = 1
            for sh in range(shifts):
                off = (first + sh) * period if period > 0.0 else 0.0
                for b in range(1, breaks.shape[0] - 1):
                    tb = breaks[b] + off
                    if lo_t < tb < hi_t and nc < cuts.shape[0] - 1:
                        cuts[nc] = (tb - t0) / dt
                        nc += 1
        cuts[nc] = 1.0
        nc += 1
        c = np.sort(cuts[:nc])
        g_t0 = 0.0
        g_t1 = 0.0
        g_th = 0.0
        for p in range(nc - 1):
            a = c[p]
            wdt = c[p + 1] - a
            if wdt <= 0.0:
                continue
            for k in range(gx.shape[0]):
                x = a + wdt * gx[k]
                w = wdt * gw[k]
                _, r, rp, _ = profile_eval(t0 + x * dt, prof)
                sp = math.sqrt(dt * dt + r * r * dth * dth)
                total += w * sp
                if sp == 0.0:
                    continue
                q = r * rp * dth * dth
                g_t0 += w * (-dt + q * (1.0 - x)) / sp
                g_t1 += w * (dt + q * x) / sp
                g_th += w * r * r * dth / sp
        grad[i, 0] += g_t0
        grad[i + 1, 0] += g_t1
        if not pole[i]:
            grad[i, 1] -= g_th
        if not pole[i + 1]:
            grad[i + 1, 1] += g_th
    return total, grad
