"""Vectorised numpy implementation of the batched RK4 kernel.

Used when the compiled ``_kernel`` extension is unavailable, or when forced
with ``KAPPAQKD_BACKEND=python``.  Every operation is elementwise, so the
result for a given trajectory does not depend on the batch it was run in.
"""
import numpy as np

TANH_CLAMP = 40.0


def _tanh_sat(x):
    # tanh(+-40) is exactly +-1.0 in double precision
    return np.tanh(np.clip(x, -TANH_CLAMP, TANH_CLAMP))


def _rhs(t, z1, z2, kappa, eps_coef, kick_coef, arg_coef):
    eps = 1.0 + eps_coef * t * t
    th = _tanh_sat(arg_coef * (z1 - kappa * z2) * t / eps)
    kick = kick_coef / eps
    spread = eps_coef * t / eps
    return spread * z1 + kick * th, spread * z2 - kappa * kick * th


def rk4_batch(z1, z2, kappa, eps_coef, kick_coef, arg_coef, t_end, n_steps, window_start, store_paths=False):
    """Integrate a batch of (z1, z2) pairs with classical fixed-step RK4.

    Returns ``(z1_end, z2_end, stable1, stable2, paths)`` where ``stable*``
    flags that the sign of the coordinate stayed equal to its final sign on
    every step index ``>= window_start`` and ``paths`` is either ``None`` or
    an array of shape ``(2, n_steps + 1, n)``.
    """
    z1 = np.array(z1, dtype=np.float64, copy=True)
    z2 = np.array(z2, dtype=np.float64, copy=True)
    kappa = np.ascontiguousarray(kappa, dtype=np.float64)
    n = z1.shape[0]
    h = t_end / n_steps
    paths = None
    if store_paths:
        paths = np.empty((2, n_steps + 1, n))
        paths[0, 0] = z1
        paths[1, 0] = z2
    # running sign record over the commitment window
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    ok1 = np.ones(n, dtype=bool)
    ok2 = np.ones(n, dtype=bool)
    if window_start == 0:
        s1, s2 = np.sign(z1), np.sign(z2)
        ok1 &= s1 != 0
        ok2 &= s2 != 0
    for k in range(n_steps):
        t = k * h
        a1, a2 = _rhs(t, z1, z2, kappa, eps_coef, kick_coef, arg_coef)
        b1, b2 = _rhs(t + 0.5 * h, z1 + 0.5 * h * a1, z2 + 0.5 * h * a2, kappa, eps_coef, kick_coef, arg_coef)
        c1, c2 = _rhs(t + 0.5 * h, z1 + 0.5 * h * b1, z2 + 0.5 * h * b2, kappa, eps_coef, kick_coef, arg_coef)
        d1, d2 = _rhs((k + 1) * h, z1 + h * c1, z2 + h * c2, kappa, eps_coef, kick_coef, arg_coef)
        z1 = z1 + (h / 6.0) * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        z2 = z2 + (h / 6.0) * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        if store_paths:
            paths[0, k + 1] = z1
            paths[1, k + 1] = z2
        if k + 1 == window_start:
            s1, s2 = np.sign(z1), np.sign(z2)
            ok1 &= s1 != 0
            ok2 &= s2 != 0
        elif k + 1 > window_start:
            ok1 &= np.sign(z1) == s1
            ok2 &= np.sign(z2) == s2
    return z1, z2, ok1, ok2, paths
