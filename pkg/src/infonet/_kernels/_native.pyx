# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: likelihood tables, mutual-information accumulation, Adam.

Every public function here has a numpy twin in ``_fallback`` with the same
signature.  Results agree to rounding; within one backend the pointwise and
table paths are bit-identical because they share the same inline routines.
"""
import numpy as np

cimport numpy as cnp
from libc.float cimport FLT_MIN
from libc.math cimport atan2, exp, fabs, fabsf, fmod, log, sqrtf
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double RAD2DEG = 180.0 / 3.141592653589793
cdef double COINCIDENT = 1e-9


cdef inline double _wrap(double d) noexcept nogil:
    d = fmod(d, 360.0)
    if d > 180.0:
        d -= 360.0
    elif d <= -180.0:
        d += 360.0
    return d


cdef inline double _bearing(double dn, double de) noexcept nogil:
    cdef double b = atan2(de, dn) * RAD2DEG
    if b < 0.0:
        b += 360.0
    if b >= 360.0:
        b -= 360.0
    return b


cdef inline void _bearing_row(double dn, double de, double sigma, int nz,
                              double* out) noexcept nogil:
    cdef int k
    cdef double beta, d, w, dmin, s = 0.0
    cdef double step = 360.0 / nz
    cdef double two_var = 2.0 * sigma * sigma
    if fabs(dn) < COINCIDENT and fabs(de) < COINCIDENT:
        for k in range(nz):
            out[k] = 1.0 / nz
        return
    beta = _bearing(dn, de)
    dmin = 1e300
    for k in range(nz):
        d = _wrap(k * step - beta)
        out[k] = d * d
        if out[k] < dmin:
            dmin = out[k]
    # shifting by the smallest squared deviation keeps the peak at exp(0),
    # so narrow kernels cannot underflow to an all-zero row
    for k in range(nz):
        w = exp(-(out[k] - dmin) / two_var)
        out[k] = w
        s += w
    for k in range(nz):
        out[k] = out[k] / s


cdef inline double _fov_p1(double dn, double de, double heading,
                          double pf, double pr, double ps) noexcept nogil:
    cdef double d
    if fabs(dn) < COINCIDENT and fabs(de) < COINCIDENT:
        return 0.5
    d = fabs(_wrap(_bearing(dn, de) - heading))
    if d <= 60.0:
        return pf
    if d >= 120.0:
        return pr
    return ps


def bearing_rows(const double[::1] dn, const double[::1] de, double sigma, int nz):
    """Normalized bearing likelihood rows, one per (north, east) offset pair."""
    cdef Py_ssize_t i, m = dn.shape[0]
    out = np.empty((m, nz), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            _bearing_row(dn[i], de[i], sigma, nz, &o[i, 0])
    return out


def fov_p1(const double[::1] dn, const double[::1] de, const double[::1] heading,
           double pf=0.9, double pr=0.1, double ps=0.5):
    """P(z=1) of the front/rear antenna sensor for each offset/heading triple."""
    cdef Py_ssize_t i, m = dn.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(m):
            o[i] = _fov_p1(dn[i], de[i], heading[i], pf, pr, ps)
    return out


def bearing_table(const double[::1] sn, const double[::1] se,
                  const double[::1] tn, const double[::1] te,
                  double sigma, int nz):
    """Dense (sensor, target, z) table; z is the stride-1 axis."""
    cdef Py_ssize_t x, t, nx = sn.shape[0], nt = tn.shape[0]
    out = np.empty((nx, nt, nz), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for x in range(nx):
            for t in range(nt):
                _bearing_row(tn[t] - sn[x], te[t] - se[x], sigma, nz, &o[x, t, 0])
    return out


def fov_table(const double[::1] sn, const double[::1] se,
              const double[::1] headings,
              const double[::1] tn, const double[::1] te,
              double pf=0.9, double pr=0.1, double ps=0.5):
    """Dense (sensor position * heading, target, z) table for z in {0, 1}."""
    cdef Py_ssize_t p, h, t, np_ = sn.shape[0], nh = headings.shape[0]
    cdef Py_ssize_t nt = tn.shape[0], row
    cdef double p1
    out = np.empty((np_ * nh, nt, 2), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for p in range(np_):
            for h in range(nh):
                row = p * nh + h
                for t in range(nt):
                    p1 = _fov_p1(tn[t] - sn[p], te[t] - se[p], headings[h], pf, pr, ps)
                    o[row, t, 0] = 1.0 - p1
                    o[row, t, 1] = p1
    return out


def mi_rows(const double[:, :, ::1] table, const double[::1] belief):
    """Mutual information H(z) - H(z | b) for every sensor row of ``table``.

    Negative round-off is clamped to zero.
    """
    cdef Py_ssize_t x, t, z
    cdef Py_ssize_t nx = table.shape[0], nt = table.shape[1], nz = table.shape[2]
    cdef double bt, p, cond, hz, mi
    cdef const double* row
    if belief.shape[0] != nt:
        raise ValueError("belief length does not match table targets")
    out = np.empty(nx, dtype=np.float64)
    cdef double[::1] o = out
    cdef double* pz = <double*> malloc(nz * sizeof(double))
    if pz == NULL:
        raise MemoryError()
    try:
        with nogil:
            for x in range(nx):
                for z in range(nz):
                    pz[z] = 0.0
                cond = 0.0
                for t in range(nt):
                    bt = belief[t]
                    row = &table[x, t, 0]
                    for z in range(nz):
                        p = row[z]
                        pz[z] += bt * p
                        if p > 0.0:
                            cond += bt * p * log(p)
                hz = 0.0
                for z in range(nz):
                    if pz[z] > 0.0:
                        hz -= pz[z] * log(pz[z])
                mi = hz + cond
                o[x] = mi if mi > 0.0 else 0.0
    finally:
        free(pz)
    return out


def adam_update(float[::1] p, const float[::1] g, float[::1] m, float[::1] v,
                double b1, double b2, double lr_t, double eps_t):
    """One fused Adam step, in place: ``p -= lr_t * m / (sqrt(v) + eps_t)``.

    ``lr_t`` and ``eps_t`` carry the bias corrections (see ``optim.Adam``).
    Moments below the smallest normal float are flushed to zero: the moments
    of units whose gradient stays zero decay into the subnormal range, where
    arithmetic is two orders of magnitude slower.
    """
    cdef Py_ssize_t i, n = p.shape[0]
    cdef float fb1 = b1, fb2 = b2, a1 = 1.0 - b1, a2 = 1.0 - b2
    cdef float flr = lr_t, feps = eps_t, gi, mi, vi
    if g.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("adam_update: length mismatch")
    with nogil:
        for i in range(n):
            gi = g[i]
            mi = fb1 * m[i] + a1 * gi
            vi = fb2 * v[i] + a2 * gi * gi
            if fabsf(mi) < FLT_MIN:
                mi = 0.0
            if vi < FLT_MIN:
                vi = 0.0
            m[i] = mi
            v[i] = vi
            p[i] -= flr * mi / (sqrtf(vi) + feps)
