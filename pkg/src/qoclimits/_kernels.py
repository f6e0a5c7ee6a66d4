"""Compiled fixed-step RK4 loops used by :mod:`qoclimits.dynamics`.

Control values are supplied on the half-step grid (``2 * n_steps + 1``
points) so that every RK4 stage sees the exact pulse value.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _combine(a0, a1, f, a2, x, out):
    m = a0.shape[0]
    for i in range(m):
        for j in range(m):
            out[i, j] = a0[i, j] + f * a1[i, j] + x * a2[i, j]


@njit(cache=True)
def _matvec(a, x, out):
    m = x.shape[0]
    for i in range(m):
        acc = a[i, 0] * x[0]
        for j in range(1, m):
            acc += a[i, j] * x[j]
        out[i] = acc


@njit(cache=True)
def _rk4_step(la, lm, lb, v, dt, k1, k2, k3, k4, w):
    m = v.shape[0]
    _matvec(la, v, k1)
    for i in range(m):
        w[i] = v[i] + 0.5 * dt * k1[i]
    _matvec(lm, w, k2)
    for i in range(m):
        w[i] = v[i] + 0.5 * dt * k2[i]
    _matvec(lm, w, k3)
    for i in range(m):
        w[i] = v[i] + dt * k3[i]
    _matvec(lb, w, k4)
    for i in range(m):
        v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def _split_deriv(l0, l1, f, x, out):
    m = x.shape[0]
    for i in range(m):
        a = l0[i, 0] * x[0]
        b = l1[i, 0] * x[0]
        for j in range(1, m):
            a += l0[i, j] * x[j]
            b += l1[i, j] * x[j]
        out[i] = a + f * b


@njit(cache=True)
def rk4_linear(l0, l1, f_half, v0, dt, record):
    """Integrate ``dv/dt = (l0 + f(t) l1) v``. Returns all states if ``record``.

    Works for real or complex arrays (all three must share the dtype).
    """
    n_steps = (f_half.shape[0] - 1) // 2
    m = v0.shape[0]
    v = v0.copy()
    k1 = np.empty_like(v0)
    k2 = np.empty_like(v0)
    k3 = np.empty_like(v0)
    k4 = np.empty_like(v0)
    w = np.empty_like(v0)
    h = 0.5 * dt
    s = dt / 6.0
    if record:
        path = np.empty((n_steps + 1, m), v0.dtype)
        path[0] = v
    else:
        path = np.empty((1, m), v0.dtype)
    for k in range(n_steps):
        fm = f_half[2 * k + 1]
        _split_deriv(l0, l1, f_half[2 * k], v, k1)
        for i in range(m):
            w[i] = v[i] + h * k1[i]
        _split_deriv(l0, l1, fm, w, k2)
        for i in range(m):
            w[i] = v[i] + h * k2[i]
        _split_deriv(l0, l1, fm, w, k3)
        for i in range(m):
            w[i] = v[i] + dt * k3[i]
        _split_deriv(l0, l1, f_half[2 * k + 2], w, k4)
        for i in range(m):
            v[i] += s * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if record:
            path[k + 1] = v
    if not record:
        path[0] = v
    return path


@njit(cache=True)
def rk4_schrodinger(a0, a1, a2, f_half, xi, psi0, dt, record):
    """RK4 for ``dpsi/dt = (a0 + f a1 + xi a2) psi`` for a batch of noise traces.

    ``xi`` has shape ``(n_real, n_steps + 1)``; ``xi[r, k]`` is held over step
    ``k``. The state is renormalised after each step and the largest norm
    drift seen before renormalisation is returned. With ``record`` the whole
    path of the first trace is returned as well.
    """
    n_steps = (f_half.shape[0] - 1) // 2
    n_real = xi.shape[0]
    m = psi0.shape[0]
    finals = np.empty((n_real, m), np.complex128)
    k1 = np.empty(m, np.complex128)
    k2 = np.empty(m, np.complex128)
    k3 = np.empty(m, np.complex128)
    k4 = np.empty(m, np.complex128)
    w = np.empty(m, np.complex128)
    la = np.empty((m, m), np.complex128)
    lm = np.empty((m, m), np.complex128)
    lb = np.empty((m, m), np.complex128)
    if record:
        path = np.empty((n_steps + 1, m), np.complex128)
    else:
        path = np.empty((1, m), np.complex128)
    max_drift = 0.0
    for r in range(n_real):
        v = psi0.copy()
        if record and r == 0:
            path[0] = v
        for k in range(n_steps):
            x = xi[r, k]
            _combine(a0, a1, f_half[2 * k], a2, x, la)
            _combine(a0, a1, f_half[2 * k + 1], a2, x, lm)
            _combine(a0, a1, f_half[2 * k + 2], a2, x, lb)
            _rk4_step(la, lm, lb, v, dt, k1, k2, k3, k4, w)
            nrm = 0.0
            for i in range(m):
                nrm += v[i].real * v[i].real + v[i].imag * v[i].imag
            nrm = np.sqrt(nrm)
            if abs(nrm - 1.0) > max_drift:
                max_drift = abs(nrm - 1.0)
            for i in range(m):
                v[i] /= nrm
            if record and r == 0:
                path[k + 1] = v
        finals[r] = v
    return finals, path, max_drift


@njit(cache=True)
def rk4_qubit(a0, a1, a2, f_half, xi, psi0, dt, record):
    """Unrolled two-level version of :func:`rk4_schrodinger`."""
    n_steps = (f_half.shape[0] - 1) // 2
    n_real = xi.shape[0]
    finals = np.empty((n_real, 2), np.complex128)
    if record:
        path = np.empty((n_steps + 1, 2), np.complex128)
    else:
        path = np.empty((1, 2), np.complex128)
    b00, b01, b10, b11 = a0[0, 0], a0[0, 1], a0[1, 0], a0[1, 1]
    c00, c01, c10, c11 = a1[0, 0], a1[0, 1], a1[1, 0], a1[1, 1]
    d00, d01, d10, d11 = a2[0, 0], a2[0, 1], a2[1, 0], a2[1, 1]
    h = 0.5 * dt
    s = dt / 6.0
    max_drift = 0.0
    for r in range(n_real):
        v0 = psi0[0]
        v1 = psi0[1]
        if record and r == 0:
            path[0, 0] = v0
            path[0, 1] = v1
        for k in range(n_steps):
            x = xi[r, k]
            fa = f_half[2 * k]
            fm = f_half[2 * k + 1]
            fb = f_half[2 * k + 2]
            p00 = b00 + x * d00
            p01 = b01 + x * d01
            p10 = b10 + x * d10
            p11 = b11 + x * d11
            la00 = p00 + fa * c00
            la01 = p01 + fa * c01
            la10 = p10 + fa * c10
            la11 = p11 + fa * c11
            lm00 = p00 + fm * c00
            lm01 = p01 + fm * c01
            lm10 = p10 + fm * c10
            lm11 = p11 + fm * c11
            lb00 = p00 + fb * c00
            lb01 = p01 + fb * c01
            lb10 = p10 + fb * c10
            lb11 = p11 + fb * c11
            k10 = la00 * v0 + la01 * v1
            k11 = la10 * v0 + la11 * v1
            w0 = v0 + h * k10
            w1 = v1 + h * k11
            k20 = lm00 * w0 + lm01 * w1
            k21 = lm10 * w0 + lm11 * w1
            w0 = v0 + h * k20
            w1 = v1 + h * k21
            k30 = lm00 * w0 + lm01 * w1
            k31 = lm10 * w0 + lm11 * w1
            w0 = v0 + dt * k30
            w1 = v1 + dt * k31
            k40 = lb00 * w0 + lb01 * w1
            k41 = lb10 * w0 + lb11 * w1
            v0 = v0 + s * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
            v1 = v1 + s * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
            nrm = np.sqrt(v0.real * v0.real + v0.imag * v0.imag + v1.real * v1.real + v1.imag * v1.imag)
            if abs(nrm - 1.0) > max_drift:
                max_drift = abs(nrm - 1.0)
            v0 = v0 / nrm
            v1 = v1 / nrm
            if record and r == 0:
                path[k + 1, 0] = v0
                path[k + 1, 1] = v1
        finals[r, 0] = v0
        finals[r, 1] = v1
    return finals, path, max_drift
