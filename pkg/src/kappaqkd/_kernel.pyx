# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 kernel for the two-particle z-dynamics.

Mirrors ``_kernel_py.rk4_batch`` operation for operation; the only expected
bit-level difference is libm ``tanh`` versus numpy's ``tanh``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh

cnp.import_array()

cdef double TANH_CLAMP = 40.0


cdef inline double tanh_sat(double x) noexcept nogil:
    if x > TANH_CLAMP:
        return 1.0
    if x < -TANH_CLAMP:
        return -1.0
    return tanh(x)


cdef inline void rhs(double t, double z1, double z2, double kappa,
                     double eps_coef, double kick_coef, double arg_coef,
                     double* v1, double* v2) noexcept nogil:
    cdef double eps = 1.0 + eps_coef * t * t
    cdef double th = tanh_sat(arg_coef * (z1 - kappa * z2) * t / eps)
    cdef double kick = kick_coef / eps
    cdef double spread = eps_coef * t / eps
    v1[0] = spread * z1 + kick * th
    v2[0] = spread * z2 - kappa * kick * th


cdef inline double csign(double x) noexcept nogil:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def rk4_batch(z1_in, z2_in, kappa_in, double eps_coef, double kick_coef, double arg_coef,
              double t_end, Py_ssize_t n_steps, Py_ssize_t window_start, bint store_paths=False):
    cdef double[::1] z1v = np.array(z1_in, dtype=np.float64, copy=True)
    cdef double[::1] z2v = np.array(z2_in, dtype=np.float64, copy=True)
    cdef double[::1] kv = np.ascontiguousarray(kappa_in, dtype=np.float64)
    cdef Py_ssize_t n = z1v.shape[0]
    ok1_arr = np.ones(n, dtype=np.uint8)
    ok2_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] ok1 = ok1_arr
    cdef unsigned char[::1] ok2 = ok2_arr
    paths = None
    cdef double[:, :, ::1] pv
    if store_paths:
        paths = np.empty((2, n_steps + 1, n))
        pv = paths
    cdef double h = t_end / n_steps
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef Py_ssize_t i, k
    cdef double z1, z2, kap, t, s1, s2
    cdef double a1, a2, b1, b2, c1, c2, d1, d2
    with nogil:
        for i in range(n):
            z1 = z1v[i]
            z2 = z2v[i]
            kap = kv[i]
            s1 = 0.0
            s2 = 0.0
            if store_paths:
                pv[0, 0, i] = z1
                pv[1, 0, i] = z2
            if window_start == 0:
                s1 = csign(z1)
                s2 = csign(z2)
                if s1 == 0.0:
                    ok1[i] = 0
                if s2 == 0.0:
                    ok2[i] = 0
            for k in range(n_steps):
                t = k * h
                rhs(t, z1, z2, kap, eps_coef, kick_coef, arg_coef, &a1, &a2)
                rhs(t + half, z1 + half * a1, z2 + half * a2, kap, eps_coef, kick_coef, arg_coef, &b1, &b2)
                rhs(t + half, z1 + half * b1, z2 + half * b2, kap, eps_coef, kick_coef, arg_coef, &c1, &c2)
                rhs((k + 1) * h, z1 + h * c1, z2 + h * c2, kap, eps_coef, kick_coef, arg_coef, &d1, &d2)
                z1 = z1 + sixth * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
                z2 = z2 + sixth * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
                if store_paths:
                    pv[0, k + 1, i] = z1
                    pv[1, k + 1, i] = z2
                if k + 1 == window_start:
                    s1 = csign(z1)
                    s2 = csign(z2)
                    if s1 == 0.0:
                        ok1[i] = 0
                    if s2 == 0.0:
                        ok2[i] = 0
                elif k + 1 > window_start:
                    if csign(z1) != s1:
                        ok1[i] = 0
                    if csign(z2) != s2:
                        ok2[i] = 0
            z1v[i] = z1
            z2v[i] = z2
    return np.asarray(z1v), np.asarray(z2v), ok1_arr.astype(bool), ok2_arr.astype(bool), paths
