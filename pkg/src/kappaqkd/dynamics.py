"""Two-particle Stern-Gerlach z-dynamics in the Bohmian picture.

Particle 1 (Alice) sees the field ``B0 + B z1``; particle 2 (Bob) sees
``kappa * (B0 + B z2)``.  Only the z components are dynamical.  With
``eps(t) = 1 + hbar^2 t^2 / (4 sigma0^4 m^2)`` and kick strength
``g = B mu T`` the guidance velocities are::

    dz1/dt = hbar^2 t z1 / (4 m^2 sigma0^4 eps) + g/(m eps) * tanh(X)
    dz2/dt = hbar^2 t z2 / (4 m^2 sigma0^4 eps) - kappa g/(m eps) * tanh(X)
    X      = g t (z1 - kappa z2) / (m sigma0^2 eps)

The combination ``u = z1 - kappa z2`` has a velocity with the sign of ``u``
itself, so ``sign(u)`` is conserved and fixes both measured spins.  That is
what :func:`analytic_outcome` exploits.

The batched RK4 kernel comes from the compiled ``_kernel`` extension when it
is importable, otherwise from the numpy implementation in ``_kernel_py``.
Set ``KAPPAQKD_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from . import _kernel_py
from .errors import ConfigError, NotCommitted, TieError

if os.environ.get("KAPPAQKD_BACKEND", "").lower() == "python":
    _rk4_batch = _kernel_py.rk4_batch
    BACKEND = "python"
else:
    try:
        from ._kernel import rk4_batch as _rk4_batch

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _rk4_batch = _kernel_py.rk4_batch
        BACKEND = "python"

TANH_CLAMP = _kernel_py.TANH_CLAMP


def _finite(x):
    return isinstance(x, (int, float, np.floating, np.integer)) and math.isfinite(x)


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the Stern-Gerlach setup (dimensionless units).

    The defaults give ``g = B mu T = 5`` and ``eps(t) = 1 + t^2/4``.
    ``offset`` (B0) is carried for completeness; it never enters the
    z-dynamics.
    """

    mass: float = 1.0
    moment: float = 1.0
    gradient: float = 5.0
    offset: float = 0.0
    interaction_time: float = 1.0
    halfwidth: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("mass", "moment", "gradient", "offset", "interaction_time", "halfwidth", "hbar"):
            if not _finite(getattr(self, name)):
                raise ConfigError(f"physics.{name} must be a finite number, got {getattr(self, name)!r}")
        for name in ("mass", "halfwidth", "hbar", "interaction_time"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"physics.{name} must be > 0")
        if self.gradient == 0 or self.moment == 0:
            raise ConfigError("physics.gradient and physics.moment must be nonzero")
        if self.offset < 0:
            raise ConfigError("physics.offset must be >= 0")

    @property
    def kick_strength(self) -> float:
        """g = B * mu * T."""
        return self.gradient * self.moment * self.interaction_time

    @property
    def eps_coef(self) -> float:
        return self.hbar**2 / (4.0 * self.halfwidth**4 * self.mass**2)

    def kernel_coefficients(self) -> tuple[float, float, float]:
        """(eps_coef, kick_coef, arg_coef) as consumed by the RK4 kernels."""
        g = self.kick_strength
        return self.eps_coef, g / self.mass, g / (self.mass * self.halfwidth**2)


@dataclass(frozen=True)
class HiddenState:
    z1: float
    z2: float

    def __post_init__(self):
        if not (_finite(self.z1) and _finite(self.z2)):
            raise ConfigError(f"hidden state must be finite, got ({self.z1!r}, {self.z2!r})")


@dataclass(frozen=True)
class Kappa:
    """Bob's field scale ``kappa = sign * magnitude``."""

    magnitude: float
    sign: int = 1

    def __post_init__(self):
        if not (_finite(self.magnitude) and self.magnitude > 0):
            raise ConfigError(f"kappa magnitude must be finite and > 0, got {self.magnitude!r}")
        if self.sign not in (1, -1):
            raise ConfigError(f"kappa sign must be +1 or -1, got {self.sign!r}")

    @classmethod
    def from_value(cls, value: float) -> "Kappa":
        if value == 0:
            raise ConfigError("kappa must be nonzero")
        return cls(abs(float(value)), 1 if value > 0 else -1)

    @property
    def value(self) -> float:
        return self.sign * self.magnitude


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float = 5.0
    n_steps: int = 500
    commitment_window: float = 0.2
    commitment_margin: float = 2.0

    def __post_init__(self):
        if not (_finite(self.t_end) and self.t_end > 0):
            raise ConfigError("integrator.t_end must be > 0")
        if not isinstance(self.n_steps, (int, np.integer)) or isinstance(self.n_steps, bool) or self.n_steps < 10:
            raise ConfigError("integrator.n_steps must be an integer >= 10")
        if not (_finite(self.commitment_window) and 0 < self.commitment_window < 1):
            raise ConfigError("integrator.commitment_window must lie in (0, 1)")
        if not (_finite(self.commitment_margin) and self.commitment_margin > 0):
            raise ConfigError("integrator.commitment_margin must be > 0")

    @property
    def window_start(self) -> int:
        """First step index inside the commitment window."""
        return self.n_steps - max(1, math.ceil(self.commitment_window * self.n_steps))

    def times(self) -> np.ndarray:
        h = self.t_end / self.n_steps
        return np.arange(self.n_steps + 1) * h


@dataclass
class TrajectoryResult:
    times: np.ndarray
    z1_path: np.ndarray
    z2_path: np.ndarray
    outcome_alice: int
    outcome_bob: int
    committed: bool
    kappa: Kappa = field(default=None)


@dataclass
class BatchResult:
    """Outcomes of a batch of trajectories; arrays are aligned with the inputs."""

    z1_end: np.ndarray
    z2_end: np.ndarray
    outcome_alice: np.ndarray
    outcome_bob: np.ndarray
    committed: np.ndarray
    paths: np.ndarray | None = None


def epsilon(t, params: PhysicalParams):
    """Packet spreading factor ``1 + hbar^2 t^2 / (4 sigma0^4 m^2)``."""
    return 1.0 + params.eps_coef * t * t


def _tanh_sat(x):
    if x > TANH_CLAMP:
        return 1.0
    if x < -TANH_CLAMP:
        return -1.0
    return math.tanh(x)


def velocity(state, t: float, kappa: Kappa, params: PhysicalParams) -> tuple[float, float]:
    """Guidance velocities ``(dz1/dt, dz2/dt)`` at time ``t``.

    ``state`` is a :class:`HiddenState` or any ``(z1, z2)`` pair.
    """
    z1, z2 = (state.z1, state.z2) if isinstance(state, HiddenState) else state
    if t < 0:
        raise ValueError("t must be >= 0")
    k = kappa.value
    eps = epsilon(t, params)
    eps_coef, kick_coef, arg_coef = params.kernel_coefficients()
    th = _tanh_sat(arg_coef * (z1 - k * z2) * t / eps)
    kick = kick_coef / eps
    spread = eps_coef * t / eps
    return spread * z1 + kick * th, spread * z2 - k * kick * th


def _sign(x):
    return np.where(x > 0, 1, np.where(x < 0, -1, 0)).astype(np.int8)


def integrate_batch(
    z1,
    z2,
    kappa,
    params: PhysicalParams,
    cfg: IntegratorConfig,
    store_paths: bool = False,
) -> BatchResult:
    """Integrate many independent pairs at once.

    ``kappa`` is a scalar or an array of signed kappa values aligned with
    ``z1``/``z2``.  Each trajectory is computed independently of the others,
    so splitting a batch never changes any individual result.
    """
    z1 = np.atleast_1d(np.asarray(z1, dtype=np.float64))
    z2 = np.atleast_1d(np.asarray(z2, dtype=np.float64))
    kap = np.broadcast_to(np.asarray(kappa, dtype=np.float64), z1.shape).copy()
    if z1.shape != z2.shape:
        raise ValueError("z1 and z2 must have the same shape")
    eps_coef, kick_coef, arg_coef = params.kernel_coefficients()
    z1e, z2e, ok1, ok2, paths = _rk4_batch(
        z1, z2, kap, eps_coef, kick_coef, arg_coef,
        float(cfg.t_end), int(cfg.n_steps), int(cfg.window_start), bool(store_paths),
    )
    threshold = cfg.commitment_margin * params.halfwidth * math.sqrt(epsilon(cfg.t_end, params))
    committed = ok1 & ok2 & (np.abs(z1e) >= threshold) & (np.abs(z2e) >= threshold)
    return BatchResult(z1e, z2e, _sign(z1e), _sign(z2e), committed, paths)


def integrate_pair(
    initial: HiddenState,
    kappa: Kappa,
    params: PhysicalParams | None = None,
    cfg: IntegratorConfig | None = None,
    strict: bool = False,
) -> TrajectoryResult:
    """RK4-integrate one pair from t=0 to ``cfg.t_end`` and read off the spins.

    Outcomes are the signs of z1 and z2 at ``t_end``.  The result is
    flagged ``committed`` when both signs hold over the commitment window
    and both ``|z|`` exceed ``margin * sigma0 * sqrt(eps(t_end))``.  An
    uncommitted result is returned as-is unless ``strict`` is set, in which
    case :class:`NotCommitted` is raised.
    """
    params = params or PhysicalParams()
    cfg = cfg or IntegratorConfig()
    res = integrate_batch([initial.z1], [initial.z2], kappa.value, params, cfg, store_paths=True)
    out = TrajectoryResult(
        times=cfg.times(),
        z1_path=res.paths[0, :, 0].copy(),
        z2_path=res.paths[1, :, 0].copy(),
        outcome_alice=int(res.outcome_alice[0]),
        outcome_bob=int(res.outcome_bob[0]),
        committed=bool(res.committed[0]),
        kappa=kappa,
    )
    if strict and not out.committed:
        raise NotCommitted(f"trajectory from ({initial.z1}, {initial.z2}) with kappa={kappa.value} did not commit")
    return out


def analytic_outcome(initial: HiddenState, kappa: Kappa) -> tuple[int, int]:
    """Closed-form spins: ``a = sign(z1 - kappa z2)``, ``b = -sign(kappa) a``.

    Holds for either sign of ``g``: the kick ``g tanh(g c u)`` always points
    along ``sign(u)``.
    """
    u = initial.z1 - kappa.value * initial.z2
    if u == 0:
        raise TieError(f"z1 - kappa*z2 = 0 for ({initial.z1}, {initial.z2}), kappa={kappa.value}")
    a = 1 if u > 0 else -1
    return a, -kappa.sign * a


def analytic_outcome_batch(z1, z2, kappa):
    """Vectorised :func:`analytic_outcome`; ties come back as 0."""
    kappa = np.asarray(kappa, dtype=np.float64)
    a = _sign(np.asarray(z1) - kappa * np.asarray(z2))
    return a, (-np.sign(kappa) * a).astype(np.int8)


def single_particle_outcome(z0: float, p_up: float, halfwidth: float = 1.0) -> int:
    """Deterministic spin of a lone particle from its initial position.

    Particles in the upper ``p_up`` quantile of the Gaussian packet deflect
    up: returns +1 iff ``Phi(z0 / halfwidth) > 1 - p_up``.  Sampling ``z0``
    from the packet therefore reproduces the Born probability ``p_up``.
    """
    if not 0.0 <= p_up <= 1.0:
        raise ValueError(f"p_up must lie in [0, 1], got {p_up}")
    if not math.isfinite(z0):
        raise ValueError("z0 must be finite")
    if p_up == 1.0:
        return 1
    if p_up == 0.0:
        return -1
    return 1 if ndtr(z0 / halfwidth) > 1.0 - p_up else -1
