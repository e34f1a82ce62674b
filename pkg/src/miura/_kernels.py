"""Compiled inner loops for the quasi-derivative system.

In cell ``k`` the antiderivative is ``Q(t) = A_k + f_k (1 - t/h) + f_{k+1} t/h + g_k t + (g_{k+1} - g_k) t^2 / (2h)``
with ``A_k = Q(x_k+) - f_k``, so atoms only enter through ``A``.
"""

import numpy as np
from numba import njit

RESCALE_AT = 1e100


@njit(cache=True, inline="always")
def _q_at(A, f0, f1, g0, g1, h, t):
    return A + f0 + (f1 - f0) * (t / h) + g0 * t + (g1 - g0) * t * t / (2.0 * h)


@njit(cache=True, inline="always")
def _rhs(Q, lam, y, u):
    return Q * y + u, -(Q * Q + lam) * y - Q * u


@njit(cache=True, nogil=True)
def shoot(f, g, A, h, i0, i1, lam, y0, u0, substeps, atol):
    """Integrate ``y' = Qy + u, u' = -(Q^2 + lam) y - Qu`` from node ``i0`` to node ``i1``.

    Returns node values (ascending index order), per-node log scale factors,
    the abscissae (relative to ``x_{i0}``) of sign changes of ``y``, and a flag
    set when ``y`` and ``u`` were both below ``atol`` times the running size.
    """
    direction = 1 if i1 >= i0 else -1
    ncell = abs(i1 - i0)
    ys = np.empty(ncell + 1)
    us = np.empty(ncell + 1)
    ls = np.empty(ncell + 1)
    crossings = np.empty(ncell * substeps + 1)
    ncross = 0
    ambiguous = False

    y = y0
    u = u0
    logscale = 0.0
    size = max(abs(y), abs(u))
    last_sign = 0.0
    if y > 0:
        last_sign = 1.0
    elif y < 0:
        last_sign = -1.0

    pos = 0 if direction > 0 else ncell
    ys[pos] = y
    us[pos] = u
    ls[pos] = 0.0
    hs = h / substeps
    for step in range(ncell):
        if direction > 0:
            k = i0 + step
            t = 0.0
            ds = hs
        else:
            k = i0 - step - 1
            t = h
            ds = -hs
        Ak = A[k]
        f0 = f[k]
        f1 = f[k + 1]
        g0 = g[k]
        g1 = g[k + 1]
        for _ in range(substeps):
            Qa = _q_at(Ak, f0, f1, g0, g1, h, t)
            Qm = _q_at(Ak, f0, f1, g0, g1, h, t + 0.5 * ds)
            Qb = _q_at(Ak, f0, f1, g0, g1, h, t + ds)
            k1y, k1u = _rhs(Qa, lam, y, u)
            k2y, k2u = _rhs(Qm, lam, y + 0.5 * ds * k1y, u + 0.5 * ds * k1u)
            k3y, k3u = _rhs(Qm, lam, y + 0.5 * ds * k2y, u + 0.5 * ds * k2u)
            k4y, k4u = _rhs(Qb, lam, y + ds * k3y, u + ds * k3u)
            y_new = y + ds * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
            u_new = u + ds * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
            size = max(size, abs(y_new), abs(u_new))
            if abs(y_new) < atol * size and abs(u_new) < atol * size:
                ambiguous = True
            if y_new != 0.0:
                s = 1.0 if y_new > 0 else -1.0
                if last_sign != 0.0 and s != last_sign:
                    # linear interpolation between the two substep points
                    frac = y / (y - y_new) if y != y_new else 0.5
                    base = (k - i0) * h + t
                    crossings[ncross] = base + frac * ds
                    ncross += 1
                last_sign = s
            y = y_new
            u = u_new
            t += ds
        big = max(abs(y), abs(u))
        if big > RESCALE_AT:
            y /= big
            u /= big
            size /= big
            logscale += np.log(big)
        pos += direction
        ys[pos] = y
        us[pos] = u
        ls[pos] = logscale
    return ys, us, ls, crossings[:ncross], ambiguous
