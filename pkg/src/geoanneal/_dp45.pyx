# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) kernel for piecewise-cubic generators.

Mirrors ``_dp45_py.integrate`` step for step; only H(s) = f(s) D(s) + E(s)
generators are supported here.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, nextafter, INFINITY

cnp.import_array()

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176
cdef double A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = -71.0 / 57600, E3 = 71.0 / 16695, E4 = -71.0 / 1920, E5 = 17253.0 / 339200
cdef double E6 = -22.0 / 525, E7 = 1.0 / 40


cdef class _Generator:
    cdef double[::1] x
    cdef double[:, ::1] fc
    cdef double complex[:, :, :, ::1] Dc
    cdef double complex[:, :, :, ::1] Ec
    cdef double complex[:, ::1] Hbuf
    cdef int n, m, last

    def __init__(self, x, fc, Dc, Ec):
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.fc = np.ascontiguousarray(fc, dtype=np.float64)
        self.Dc = np.ascontiguousarray(Dc, dtype=np.complex128)
        self.Ec = np.ascontiguousarray(Ec, dtype=np.complex128)
        self.m = self.x.shape[0] - 1
        self.n = self.Dc.shape[2]
        self.Hbuf = np.zeros((self.n, self.n), dtype=np.complex128)
        self.last = 0

    cdef int interval(self, double s) nogil:
        cdef int i = self.last
        cdef int lo, hi, mid
        if s >= self.x[i] and (i == self.m - 1 or s < self.x[i + 1]):
            return i
        if i + 1 < self.m and s >= self.x[i + 1] and (i + 1 == self.m - 1 or s < self.x[i + 2]):
            self.last = i + 1
            return i + 1
        lo = 0
        hi = self.m - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.x[mid] <= s:
                lo = mid
            else:
                hi = mid - 1
        self.last = lo
        return lo

    cdef void evaluate(self, double s) nogil:
        cdef int i = self.interval(s)
        cdef double dx = s - self.x[i]
        cdef double f = ((self.fc[0, i] * dx + self.fc[1, i]) * dx + self.fc[2, i]) * dx + self.fc[3, i]
        cdef int a, b
        cdef double complex d, e
        for a in range(self.n):
            for b in range(self.n):
                d = ((self.Dc[0, i, a, b] * dx + self.Dc[1, i, a, b]) * dx
                     + self.Dc[2, i, a, b]) * dx + self.Dc[3, i, a, b]
                e = ((self.Ec[0, i, a, b] * dx + self.Ec[1, i, a, b]) * dx
                     + self.Ec[2, i, a, b]) * dx + self.Ec[3, i, a, b]
                self.Hbuf[a, b] = f * d + e

    cdef void rhs(self, double s, double complex[::1] y, double complex[::1] out) nogil:
        cdef int a, b
        cdef double complex acc
        self.evaluate(s)
        for a in range(self.n):
            acc = 0
            for b in range(self.n):
                acc = acc + self.Hbuf[a, b] * y[b]
            out[a] = -1j * acc


cdef double _rms_scaled(double complex[::1] v, double[::1] scale, int n) nogil:
    cdef double acc = 0.0, re, im
    cdef int a
    for a in range(n):
        re = v[a].real / scale[a]
        im = v[a].imag / scale[a]
        acc += re * re + im * im
    return sqrt(acc / n)


cdef inline double cabs(double complex z) nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


def integrate(x, fc, Dc, Ec, y0, s_out, double rtol=1e-9, double atol=1e-12, double h0=0.0,
              long max_steps=10000000):
    """Same contract as ``_dp45_py.integrate`` for a piecewise-cubic generator."""
    cdef _Generator gen = _Generator(x, fc, Dc, Ec)
    cdef double[::1] so = np.ascontiguousarray(s_out, dtype=np.float64)
    cdef int n = gen.n
    cdef int nout = so.shape[0]
    out_arr = np.empty((nout, n), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[::1] y = np.array(y0, dtype=np.complex128)
    cdef double complex[::1] ynew = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] tmp = np.empty(n, dtype=np.complex128)
    cdef double complex[:, ::1] k = np.empty((7, n), dtype=np.complex128)
    cdef double[::1] scale = np.empty(n, dtype=np.float64)
    cdef double complex[::1] f = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] f1 = np.empty(n, dtype=np.complex128)
    cdef double s = so[0], s_end = so[nout - 1], s_new, target
    cdef double h, h_try, h_prop, h_next, d0, d1, d2, h1, err_norm, factor, mx
    cdef long nsteps = 0, nreject = 0, nfev = 0
    cdef int j = 1, a, status = 0
    cdef bint clipped
    cdef double complex e

    with nogil:
        for a in range(n):
            out[0, a] = y[a]
        gen.rhs(s, y, f)
        nfev = 1
        if h0 <= 0:
            for a in range(n):
                scale[a] = atol + cabs(y[a]) * rtol
            d0 = _rms_scaled(y, scale, n)
            d1 = _rms_scaled(f, scale, n)
            if d0 < 1e-5 or d1 < 1e-5:
                h_try = 1e-6
            else:
                h_try = 0.01 * d0 / d1
            if h_try > s_end - s:
                h_try = s_end - s
            for a in range(n):
                tmp[a] = y[a] + h_try * f[a]
            gen.rhs(s + h_try, tmp, f1)
            nfev += 1
            for a in range(n):
                tmp[a] = f1[a] - f[a]
            d2 = _rms_scaled(tmp, scale, n) / h_try
            mx = d1 if d1 > d2 else d2
            if mx <= 1e-15:
                h1 = h_try * 1e-3
                if h1 < 1e-6:
                    h1 = 1e-6
            else:
                h1 = pow(0.01 / mx, 1.0 / 5.0)
            h = 100 * h_try if 100 * h_try < h1 else h1
        else:
            h = h0

        while j < nout:
            target = so[j]
            if h < 10 * fabs(nextafter(s, INFINITY) - s):
                status = 1
                break
            if nsteps + nreject >= max_steps:
                status = 2
                break
            h_prop = h
            clipped = s + h >= target
            if clipped:
                h = target - s
            for a in range(n):
                k[0, a] = f[a]
            for a in range(n):
                tmp[a] = y[a] + h * (A21 * k[0, a])
            gen.rhs(s + C2 * h, tmp, k[1])
            for a in range(n):
                tmp[a] = y[a] + h * (A31 * k[0, a] + A32 * k[1, a])
            gen.rhs(s + C3 * h, tmp, k[2])
            for a in range(n):
                tmp[a] = y[a] + h * (A41 * k[0, a] + A42 * k[1, a] + A43 * k[2, a])
            gen.rhs(s + C4 * h, tmp, k[3])
            for a in range(n):
                tmp[a] = y[a] + h * (A51 * k[0, a] + A52 * k[1, a] + A53 * k[2, a] + A54 * k[3, a])
            gen.rhs(s + C5 * h, tmp, k[4])
            for a in range(n):
                tmp[a] = y[a] + h * (A61 * k[0, a] + A62 * k[1, a] + A63 * k[2, a]
                                     + A64 * k[3, a] + A65 * k[4, a])
            gen.rhs(s + h, tmp, k[5])
            for a in range(n):
                ynew[a] = y[a] + h * (B1 * k[0, a] + B3 * k[2, a] + B4 * k[3, a]
                                      + B5 * k[4, a] + B6 * k[5, a])
            if clipped:
                s_new = target
            else:
                s_new = s + h
            gen.rhs(s_new, ynew, k[6])
            nfev += 6
            for a in range(n):
                e = h * (E1 * k[0, a] + E3 * k[2, a] + E4 * k[3, a] + E5 * k[4, a]
                         + E6 * k[5, a] + E7 * k[6, a])
                tmp[a] = e
                mx = cabs(y[a])
                if cabs(ynew[a]) > mx:
                    mx = cabs(ynew[a])
                scale[a] = atol + mx * rtol
            err_norm = _rms_scaled(tmp, scale, n)
            if err_norm <= 1.0:
                if err_norm == 0:
                    factor = 10.0
                else:
                    factor = 0.9 * pow(err_norm, -0.2)
                    if factor > 10.0:
                        factor = 10.0
                nsteps += 1
                s = s_new
                for a in range(n):
                    y[a] = ynew[a]
                    f[a] = k[6, a]
                h_next = h * factor
                if clipped:
                    if h_prop > h_next:
                        h_next = h_prop
                    for a in range(n):
                        out[j, a] = y[a]
                    j += 1
                h = h_next
            else:
                nreject += 1
                factor = 0.9 * pow(err_norm, -0.2)
                if not factor >= 0.2:  # also catches a NaN error norm
                    factor = 0.2
                h = h * factor

    return out_arr, {"nsteps": nsteps, "nfev": nfev, "nreject": nreject, "status": status,
                     "s_reached": s, "recorded": j}
