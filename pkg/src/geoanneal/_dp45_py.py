"""Pure-Python Dormand-Prince 5(4) integrator for i dpsi/ds = H(s) psi.

Reference implementation of the compiled kernel in ``_dp45.pyx``; both follow
the same step-size control so their trajectories agree to round-off.

The generator is either piecewise cubic, H(s) = f(s) D(s) + E(s) with
coefficient arrays in scipy PPoly layout, or any callable s -> (N, N) matrix.
"""
import bisect

import numpy as np

C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
E = (-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1.0 / 5.0


class PiecewiseCubic:
    """H(s) = f(s) D(s) + E(s) on shared breakpoints ``x``.

    f_c: (4, m) real; D_c, E_c: (4, m, N, N) complex; highest power first.
    """

    def __init__(self, x, f_c, D_c, E_c):
        self.x = np.ascontiguousarray(x, dtype=float)
        self.f_c = np.ascontiguousarray(f_c, dtype=float)
        self.D_c = np.ascontiguousarray(D_c, dtype=complex)
        self.E_c = np.ascontiguousarray(E_c, dtype=complex)
        self.n = self.D_c.shape[-1]
        self._xs = list(self.x)

    def interval(self, s):
        i = bisect.bisect_right(self._xs, s) - 1
        return min(max(i, 0), len(self._xs) - 2)

    def __call__(self, s):
        i = self.interval(s)
        dx = s - self.x[i]
        f = ((self.f_c[0, i] * dx + self.f_c[1, i]) * dx + self.f_c[2, i]) * dx + self.f_c[3, i]
        D = ((self.D_c[0, i] * dx + self.D_c[1, i]) * dx + self.D_c[2, i]) * dx + self.D_c[3, i]
        Em = ((self.E_c[0, i] * dx + self.E_c[1, i]) * dx + self.E_c[2, i]) * dx + self.E_c[3, i]
        return f * D + Em


def _rms(x):
    return np.sqrt(np.mean(np.abs(x) ** 2))


def integrate(H, y0, s_out, rtol=1e-9, atol=1e-12, h0=0.0, max_steps=10_000_000):
    """Integrate from s_out[0] to s_out[-1], recording the state at every s_out.

    Returns (states[len(s_out), N], info) where info has nsteps, nfev, nreject
    and a ``status`` (0 ok, 1 step underflow, 2 step budget exhausted).
    """
    s_out = np.asarray(s_out, dtype=float)
    y = np.array(y0, dtype=complex)
    out = np.empty((len(s_out), len(y)), dtype=complex)
    out[0] = y

    def rhs(s, v):
        return -1j * (H(s) @ v)

    s = s_out[0]
    s_end = s_out[-1]
    f = rhs(s, y)
    nfev = 1
    if h0 <= 0:
        scale = atol + np.abs(y) * rtol
        d0, d1 = _rms(y / scale), _rms(f / scale)
        h_try = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h_try = min(h_try, s_end - s)
        f1 = rhs(s + h_try, y + h_try * f)
        nfev += 1
        d2 = _rms((f1 - f) / scale) / h_try
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h_try * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        h = min(100 * h_try, h1)
    else:
        h = h0

    nsteps = nreject = 0
    k = [None] * 7
    j = 1
    status = 0
    while j < len(s_out):
        target = s_out[j]
        min_step = 10 * abs(np.nextafter(s, np.inf) - s)
        if h < min_step:
            status = 1
            break
        if nsteps + nreject >= max_steps:
            status = 2
            break
        h_prop = h
        clipped = s + h >= target
        if clipped:
            h = target - s
        k[0] = f
        for st in range(1, 6):
            dy = sum(a * kk for a, kk in zip(A[st], k[:st]))
            k[st] = rhs(s + C[st] * h, y + h * dy)
        y_new = y + h * sum(b * kk for b, kk in zip(B, k[:6]))
        s_new = target if clipped else s + h
        f_new = rhs(s_new, y_new)
        k[6] = f_new
        nfev += 6
        err = h * sum(e * kk for e, kk in zip(E, k))
        scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
        with np.errstate(invalid="ignore"):
            err_norm = _rms(err / scale)
        if err_norm <= 1.0:
            factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** ERR_EXP)
            nsteps += 1
            s, y, f = s_new, y_new, f_new
            h_next = h * factor
            if clipped:
                h_next = max(h_next, h_prop)
                out[j] = y
                j += 1
            h = h_next
        else:
            nreject += 1
            factor = SAFETY * err_norm ** ERR_EXP
            h = h * (factor if factor >= MIN_FACTOR else MIN_FACTOR)
    return out, {"nsteps": nsteps, "nfev": nfev, "nreject": nreject, "status": status,
                 "s_reached": float(s), "recorded": j}
