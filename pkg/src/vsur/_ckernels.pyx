# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled orthant kernels; same signatures as ``vsur._kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport asin, sin, exp, sqrt, fabs, floor, erfc, log, M_PI, M_SQRT1_2

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI


cdef inline double ndtr(double x) noexcept nogil:
    return 0.5 * erfc(-x * M_SQRT1_2)


cdef double ndtri(double p) noexcept nogil:
    # Wichura, AS241 (PPND16); relative accuracy about 1e-16 on (0, 1).
    cdef double q = p - 0.5, r, val
    if fabs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                        + 67265.770927008700853) * r + 45921.953931549871457) * r
                      + 13731.693765509461125) * r + 1971.5909503065514427) * r
                    + 133.14166789178437745) * r + 3.387132872796366608) / (
            ((((((5226.495278852545925 * r + 28729.085735721942674) * r
                 + 39307.89580009271061) * r + 21213.794301586595867) * r
               + 5394.1960214247511077) * r + 687.1870074920579083) * r
             + 42.313330701600911252) * r + 1.0)
    r = p if q < 0 else 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r -= 1.6
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                    + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                  + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734) / (
            ((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                 + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
               + 0.68976733498510000455) * r + 1.6763848301838038494) * r
             + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                  + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772) / (
            ((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                 + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
               + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
             + 0.59983220655588793769) * r + 1.0)
    return -val if q < 0 else val


def _gl_nodes(int n):
    x, w = np.polynomial.legendre.leggauss(n)
    keep = x > 0
    x = x[keep]
    w = w[keep]
    return (np.ascontiguousarray(np.concatenate([1.0 - x, 1.0 + x])),
            np.ascontiguousarray(np.concatenate([w, w])))

_X6, _W6 = _gl_nodes(6)
_X12, _W12 = _gl_nodes(12)
_X20, _W20 = _gl_nodes(20)

cdef double[::1] X6 = _X6
cdef double[::1] W6 = _W6
cdef double[::1] X12 = _X12
cdef double[::1] W12 = _W12
cdef double[::1] X20 = _X20
cdef double[::1] W20 = _W20


cdef double _bvnu(double h, double k, double r) nogil:
    cdef double ar = fabs(r), hk, hs, asr, sn, bvn = 0.0
    cdef double a_s, a, bs, c, d, b, sp, xs, rs, ep, asr2, tot
    cdef double[::1] x
    cdef double[::1] w
    cdef int i, n
    if r > 1.0:
        r = 1.0
    elif r < -1.0:
        r = -1.0
    if ar < 0.925:
        if ar < 0.3:
            x = X6
            w = W6
        elif ar < 0.75:
            x = X12
            w = W12
        else:
            x = X20
            w = W20
        n = x.shape[0]
        hk = h * k
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * asin(r)
        for i in range(n):
            sn = sin(asr * x[i])
            bvn += w[i] * exp((sn * hk - hs) / (1.0 - sn * sn))
        return bvn * asr / TWO_PI + ndtr(-h) * ndtr(-k)
    x = X20
    w = W20
    n = x.shape[0]
    if r < 0:
        k = -k
    hk = h * k
    if fabs(r) < 1.0:
        a_s = 1.0 - r * r
        a = sqrt(a_s)
        bs = (h - k) * (h - k)
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        asr = -0.5 * (bs / a_s + hk)
        if asr > -100.0:
            bvn = a * exp(asr) * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0 + c * d * a_s * a_s)
        if hk > -100.0:
            b = sqrt(bs)
            sp = sqrt(TWO_PI) * ndtr(-b / a)
            bvn = bvn - exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
        a = 0.5 * a
        tot = 0.0
        for i in range(n):
            xs = (a * x[i]) * (a * x[i])
            asr2 = -0.5 * (bs / xs + hk)
            if asr2 > -100.0:
                sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs)
                rs = sqrt(1.0 - xs)
                ep = exp(-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))) / rs
                tot += w[i] * exp(asr2) * (sp - ep)
        bvn = (a * tot - bvn) / TWO_PI
    if r > 0:
        return bvn + ndtr(-(h if h > k else k))
    if h >= k:
        return -bvn
    if h < 0:
        return ndtr(k) - ndtr(h) - bvn
    return ndtr(-h) - ndtr(-k) - bvn


def bvn_upper(h, k, r):
    """``P(X >= h, Y >= k)`` for standard bivariate normal with correlation ``r``."""
    hb, kb, rb = np.broadcast_arrays(np.asarray(h, dtype=float),
                                     np.asarray(k, dtype=float),
                                     np.asarray(r, dtype=float))
    shape = hb.shape
    cdef double[::1] hv = np.ascontiguousarray(hb.ravel())
    cdef double[::1] kv = np.ascontiguousarray(kb.ravel())
    cdef double[::1] rv = np.ascontiguousarray(rb.ravel())
    out = np.empty(hv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    cdef double p
    with nogil:
        for i in range(hv.shape[0]):
            p = _bvnu(hv[i], kv[i], rv[i])
            if p < 0.0:
                p = 0.0
            elif p > 1.0:
                p = 1.0
            ov[i] = p
    return out.reshape(shape)


def genz_integrate(L_in, b_in, int n_pos, gens_in, shifts_in, int n_per_shift):
    """Separation-of-variables QMC estimate of ``P(L y <= b)``; one value per shift."""
    cdef double[:, ::1] L = np.ascontiguousarray(L_in, dtype=float)
    cdef double[::1] b = np.ascontiguousarray(b_in, dtype=float)
    cdef double[::1] gens = np.ascontiguousarray(gens_in, dtype=float)
    cdef double[:, ::1] shifts = np.ascontiguousarray(shifts_in, dtype=float)
    cdef int q = L.shape[0], s = gens.shape[0], n_shifts = shifts.shape[0]
    est_arr = np.empty(n_shifts)
    cdef double[::1] est = est_arr
    cdef double[::1] y = np.zeros(q)
    cdef int m, j, anti, i, l
    cdef double u, wi, prob, lin, e, acc, arg
    with nogil:
        for m in range(n_shifts):
            acc = 0.0
            for j in range(1, n_per_shift + 1):
                for anti in range(2):
                    prob = 1.0
                    for i in range(q):
                        lin = 0.0
                        for l in range(i):
                            lin = lin + L[i, l] * y[l]
                        if i < n_pos:
                            e = ndtr((b[i] - lin) / L[i, i])
                            prob = prob * e
                            if i < s:
                                u = j * gens[i] + shifts[m, i]
                                u = u - floor(u)
                                u = fabs(2.0 * u - 1.0)
                                wi = u if anti == 0 else 1.0 - u
                                arg = wi * e
                                if arg < 1e-300:
                                    arg = 1e-300
                                elif arg > 1.0 - 1e-16:
                                    arg = 1.0 - 1e-16
                                y[i] = ndtri(arg)
                        elif lin > b[i]:
                            prob = 0.0
                    acc = acc + prob
            est[m] = acc / (2.0 * n_per_shift)
    return est_arr
