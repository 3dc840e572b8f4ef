"""Pure numpy implementations of the compiled kernels.

Same signatures and semantics as ``_native``.  Summation order over the
measurement axis is sequential, as in the compiled loops, but transcendental
functions come from numpy's ufuncs, so the two backends agree only to rounding.
"""
import numpy as np

COINCIDENT = 1e-9
_CHUNK_ENTRIES = 4_000_000


def _wrap(d):
    d = np.fmod(d, 360.0)
    d = np.where(d > 180.0, d - 360.0, d)
    return np.where(d <= -180.0, d + 360.0, d)


def _bearing(dn, de):
    b = np.arctan2(de, dn) * (180.0 / 3.141592653589793)
    b = np.where(b < 0.0, b + 360.0, b)
    return np.where(b >= 360.0, b - 360.0, b)


def bearing_rows(dn, de, sigma, nz):
    dn = np.ascontiguousarray(dn, dtype=np.float64)
    de = np.ascontiguousarray(de, dtype=np.float64)
    step = 360.0 / nz
    beta = _bearing(dn, de)
    zs = np.arange(nz) * step
    d = _wrap(zs[None, :] - beta[:, None])
    d2 = d * d
    w = np.exp(-(d2 - d2.min(axis=1, keepdims=True)) / (2.0 * sigma * sigma))
    s = w[:, 0].copy()
    for k in range(1, nz):
        s += w[:, k]
    out = w / s[:, None]
    coincident = (np.abs(dn) < COINCIDENT) & (np.abs(de) < COINCIDENT)
    out[coincident] = 1.0 / nz
    return out


def fov_p1(dn, de, heading, pf=0.9, pr=0.1, ps=0.5):
    dn = np.ascontiguousarray(dn, dtype=np.float64)
    de = np.ascontiguousarray(de, dtype=np.float64)
    heading = np.ascontiguousarray(heading, dtype=np.float64)
    d = np.abs(_wrap(_bearing(dn, de) - heading))
    out = np.where(d <= 60.0, pf, np.where(d >= 120.0, pr, ps))
    coincident = (np.abs(dn) < COINCIDENT) & (np.abs(de) < COINCIDENT)
    out[coincident] = 0.5
    return out


def bearing_table(sn, se, tn, te, sigma, nz):
    dn = (np.asarray(tn)[None, :] - np.asarray(sn)[:, None]).ravel()
    de = (np.asarray(te)[None, :] - np.asarray(se)[:, None]).ravel()
    rows = bearing_rows(dn, de, sigma, nz)
    return rows.reshape(len(sn), len(tn), nz)


def fov_table(sn, se, headings, tn, te, pf=0.9, pr=0.1, ps=0.5):
    sn, se, tn, te = (np.asarray(a, dtype=np.float64) for a in (sn, se, tn, te))
    headings = np.asarray(headings, dtype=np.float64)
    npos, nh, nt = len(sn), len(headings), len(tn)
    dn = np.broadcast_to((tn[None, :] - sn[:, None])[:, None, :], (npos, nh, nt))
    de = np.broadcast_to((te[None, :] - se[:, None])[:, None, :], (npos, nh, nt))
    hd = np.broadcast_to(headings[None, :, None], (npos, nh, nt))
    p1 = fov_p1(dn.ravel(), de.ravel(), hd.ravel(), pf, pr, ps).reshape(npos * nh, nt)
    out = np.empty((npos * nh, nt, 2))
    out[:, :, 0] = 1.0 - p1
    out[:, :, 1] = p1
    return out


def mi_rows(table, belief):
    table = np.asarray(table, dtype=np.float64)
    belief = np.asarray(belief, dtype=np.float64)
    nx, nt, nz = table.shape
    if belief.shape[0] != nt:
        raise ValueError("belief length does not match table targets")
    out = np.empty(nx)
    step = max(1, _CHUNK_ENTRIES // (nt * nz))
    for lo in range(0, nx, step):
        chunk = table[lo:lo + step]
        pz = belief @ chunk
        safe = np.where(chunk > 0.0, chunk, 1.0)
        plogp = chunk * np.log(safe)
        inner = plogp[:, :, 0].copy()
        for z in range(1, nz):
            inner += plogp[:, :, z]
        cond = inner @ belief
        safe_pz = np.where(pz > 0.0, pz, 1.0)
        hz = -(pz * np.log(safe_pz)).sum(axis=1)
        out[lo:lo + step] = hz + cond
    return np.maximum(out, 0.0)


def adam_update(p, g, m, v, b1, b2, lr_t, eps_t):
    """One fused Adam step on flat float arrays, in place.

    Moments below the smallest normal float are flushed to zero, as in the
    compiled kernel, to keep decayed moments out of the slow subnormal range.
    """
    if not (len(g) == len(m) == len(v) == len(p)):
        raise ValueError("adam_update: length mismatch")
    dt = p.dtype.type
    m *= dt(b1)
    m += dt(1.0 - b1) * g
    v *= dt(b2)
    v += dt(1.0 - b2) * (g * g)
    tiny = np.finfo(p.dtype).tiny
    m[np.abs(m) < tiny] = 0
    v[v < tiny] = 0
    denom = np.sqrt(v)
    denom += dt(eps_t)
    np.divide(m, denom, out=denom)
    denom *= dt(lr_t)
    p -= denom
