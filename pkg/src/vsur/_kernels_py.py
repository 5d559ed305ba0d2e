"""Pure numpy implementations of the hot orthant kernels.

Mirrors the compiled ``_ckernels`` extension function for function; used when
the extension is unavailable or ``VSUR_PURE_PYTHON`` is set.
"""

import numpy as np
from scipy.special import ndtr, ndtri

_TWO_PI = 2.0 * np.pi


def _gl_half(n):
    x, w = np.polynomial.legendre.leggauss(n)
    keep = x > 0
    return x[keep], w[keep]


_GL = {n: _gl_half(n) for n in (6, 12, 20)}


def _gl_nodes(n):
    """Gauss-Legendre rule mapped to (0, 2): nodes ``1 -+ x``, weights doubled up."""
    x, w = _GL[n]
    return np.concatenate([1.0 - x, 1.0 + x]), np.concatenate([w, w])


def bvn_upper(h, k, r):
    """``P(X >= h, Y >= k)`` for standard bivariate normal with correlation ``r``.

    Vectorized over broadcastable arrays. Drezner-Wesolowsky style integration
    with a Gauss-Legendre rule whose order grows with ``|r|``; accurate to
    about 1e-15 absolute.
    """
    h, k, r = np.broadcast_arrays(
        np.asarray(h, dtype=float), np.asarray(k, dtype=float), np.asarray(r, dtype=float)
    )
    shape = h.shape
    h = h.ravel().copy()
    k = k.ravel().copy()
    r = np.clip(r.ravel(), -1.0, 1.0)
    out = np.empty(h.size)

    ar = np.abs(r)
    small = ar < 0.925
    for lo, hi, n in ((0.0, 0.3, 6), (0.3, 0.75, 12), (0.75, 0.925, 20)):
        sel = np.flatnonzero(small & (ar >= lo) & (ar < hi))
        if sel.size == 0:
            continue
        x, w = _gl_nodes(n)
        hh, kk, rr = h[sel], k[sel], r[sel]
        hk = hh * kk
        hs = 0.5 * (hh * hh + kk * kk)
        asr = 0.5 * np.arcsin(rr)
        sn = np.sin(asr[:, None] * x[None, :])
        bvn = np.exp((sn * hk[:, None] - hs[:, None]) / (1.0 - sn * sn)) @ w
        out[sel] = bvn * asr / _TWO_PI + ndtr(-hh) * ndtr(-kk)

    sel = np.flatnonzero(~small)
    if sel.size:
        out[sel] = _bvn_high_corr(h[sel], k[sel], r[sel])
    return np.clip(out, 0.0, 1.0).reshape(shape)


def _bvn_high_corr(h, k, r):
    x, w = _gl_nodes(20)
    neg = r < 0
    k = np.where(neg, -k, k)
    hk = h * k
    bvn = np.zeros(h.size)
    inner = np.abs(r) < 1.0
    if np.any(inner):
        i = np.flatnonzero(inner)
        hi, ki, hki = h[i], k[i], hk[i]
        a_s = 1.0 - r[i] * r[i]
        a = np.sqrt(a_s)
        bs = (hi - ki) ** 2
        c = (4.0 - hki) / 8.0
        d = (12.0 - hki) / 80.0
        asr = -0.5 * (bs / a_s + hki)
        val = np.where(
            asr > -100.0,
            a * np.exp(asr) * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0 + c * d * a_s * a_s),
            0.0,
        )
        b = np.sqrt(bs)
        sp = np.sqrt(_TWO_PI) * ndtr(-b / a)
        val = np.where(
            hki > -100.0,
            val - np.exp(-0.5 * hki) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0),
            val,
        )
        a = 0.5 * a
        xs = (a[:, None] * x[None, :]) ** 2
        asr2 = -0.5 * (bs[:, None] / xs + hki[:, None])
        ok = asr2 > -100.0
        sp2 = 1.0 + c[:, None] * xs * (1.0 + 5.0 * d[:, None] * xs)
        rs = np.sqrt(1.0 - xs)
        ep = np.exp(-0.5 * hki[:, None] * xs / (1.0 + rs) ** 2) / rs
        terms = np.where(ok, np.exp(np.where(ok, asr2, 0.0)) * (sp2 - ep), 0.0)
        bvn[i] = (a * (terms @ w) - val) / _TWO_PI
    pos = ~neg
    res = np.empty(h.size)
    res[pos] = bvn[pos] + ndtr(-np.maximum(h[pos], k[pos]))
    j = np.flatnonzero(neg)
    hj, kj, bj = h[j], k[j], bvn[j]
    span = np.where(hj < 0, ndtr(kj) - ndtr(hj), ndtr(-hj) - ndtr(-kj))
    res[j] = np.where(hj >= kj, -bj, span - bj)
    return res


def genz_integrate(L, b, n_pos, gens, shifts, n_per_shift):
    """Separation-of-variables QMC estimate of ``P(L y <= b)``, ``y ~ N(0, I)``.

    Parameters
    ----------
    L : (q, q) lower-triangular pivoted Cholesky factor. Rows ``>= n_pos`` have a
        zero diagonal and act as indicator constraints.
    b : (q,) upper limits in the pivoted order.
    n_pos : number of strictly positive pivots.
    gens : (s,) lattice generating vector, ``s`` integration dimensions.
    shifts : (n_shifts, s) random shifts in [0, 1).
    n_per_shift : lattice points per shift (each also used antithetically).

    Returns
    -------
    ndarray, shape (n_shifts,)
        One estimate per random shift.
    """
    q = L.shape[0]
    s = gens.size
    idx = np.arange(1, n_per_shift + 1, dtype=float)
    base = np.outer(idx, gens)
    est = np.empty(shifts.shape[0])
    for m, shift in enumerate(shifts):
        u = np.abs(2.0 * ((base + shift) % 1.0) - 1.0)
        w = np.concatenate([u, 1.0 - u], axis=0)
        n = w.shape[0]
        y = np.zeros((n, q))
        prob = np.ones(n)
        for i in range(q):
            lin = y[:, :i] @ L[i, :i]
            if i < n_pos:
                e = ndtr((b[i] - lin) / L[i, i])
                prob *= e
                if i < s:
                    y[:, i] = ndtri(np.clip(w[:, i] * e, 1e-300, 1.0 - 1e-16))
            else:
                prob *= lin <= b[i]
        est[m] = prob.mean()
    return est
