"""Fixed-step time integrators and the snapshot-storing rollout driver.

All step functions accept states of shape ``(n,)`` or a batch ``(B, n)``;
right-hand sides are evaluated on the same shapes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import PhaseState, TimeGrid, Trajectory
from .errors import DimensionError, DivergenceError, SolverError, UnsupportedError


class IntegratorKind(str, Enum):
    FORWARD_EULER = "euler"
    LEAPFROG = "leapfrog"
    RK4 = "rk4"
    BACKWARD_EULER = "backward-euler"
    BDF2 = "bdf2"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"fe": "euler", "forward-euler": "euler", "lf": "leapfrog", "be": "backward-euler"}
        value = str(value).lower().replace("_", "-")
        return cls(aliases.get(value, value))


@dataclass(frozen=True)
class ImplicitSolveConfig:
    tolerance: float = 1e-10
    max_iterations: int = 50
    jacobian_epsilon: float = 1e-7

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def _rhs(f):
    """Split a system-like object or bare callable into ``(callable, owner)``."""
    if hasattr(f, "derivative"):
        return f.derivative, f
    return f, getattr(f, "__self__", None)


def _all_finite(x):
    # a single reduction is cheap; NaN/Inf entries always poison the sum
    return bool(np.isfinite(np.sum(x))) or bool(np.all(np.isfinite(x)))


def _eval(f, x):
    out = f(x)
    if not _all_finite(out):
        raise DivergenceError("right-hand side returned non-finite values")
    return out


def _raw(f, x):
    return f(x)


def euler_step(f, x, dt):
    f, _ = _rhs(f)
    return x + dt * _eval(f, x)


def rk4_step(f, x, dt, half_step_h4=False, _ev=_eval):
    """Runge-Kutta 4 step.

    ``half_step_h4=True`` evaluates the last stage at ``x + dt/2 * h3``
    instead of the classical ``x + dt * h3``; that variant is only first
    order accurate and exists for comparison.
    """
    f, _ = _rhs(f)
    h1 = _ev(f, x)
    h2 = _ev(f, x + (dt / 2) * h1)
    h3 = _ev(f, x + (dt / 2) * h2)
    h4 = _ev(f, x + ((dt / 2) if half_step_h4 else dt) * h3)
    return x + (dt / 6) * (h1 + 2 * h2 + 2 * h3 + h4)


def _leapfrog_packed(f, x, dt, nq, ev=_eval):
    p_half = x[..., nq:] + (dt / 2) * ev(f, x)[..., nq:]
    y = x.copy()
    y[..., nq:] = p_half
    y[..., :nq] = x[..., :nq] + dt * ev(f, y)[..., :nq]
    y[..., nq:] = p_half + (dt / 2) * ev(f, y)[..., nq:]
    return y


def leapfrog_step(f, s: PhaseState, dt) -> PhaseState:
    """Kick-drift-kick step; ``f`` maps packed ``[q; p]`` to packed ``[qdot; pdot]``."""
    fn, owner = _rhs(f)
    if owner is not None and not getattr(owner, "separable", True):
        raise UnsupportedError("leapfrog requires a separable (q, p) system")
    nq = s.q.shape[0]
    y = _leapfrog_packed(fn, np.concatenate([s.q, s.p]), dt, nq)
    return PhaseState(y[:nq], y[nq:])


class _ImplicitSolver:
    """Solves ``y - c * f(y) = b`` for ``y``.

    Linear systems exposing ``linear_operator()`` take a cached sparse LU
    path; everything else uses Newton with a forward-difference Jacobian.
    """

    def __init__(self, f, cfg=None):
        self.f, owner = _rhs(f)
        self.cfg = cfg or ImplicitSolveConfig()
        op = getattr(owner, "linear_operator", None)
        self.A = op() if callable(op) else None
        self._lu = {}

    def solve(self, c, b, guess):
        if self.A is not None:
            return self._solve_linear(c, b)
        if b.ndim == 1:
            return self._newton(c, b, guess)
        return np.stack([self._newton(c, bi, gi) for bi, gi in zip(b, guess)])

    def _solve_linear(self, c, b):
        lu = self._lu.get(c)
        if lu is None:
            n = self.A.shape[0]
            lu = spla.splu(sp.csc_matrix(sp.identity(n) - c * self.A))
            self._lu[c] = lu
        return lu.solve(np.ascontiguousarray(b.T)).T.copy() if b.ndim > 1 else lu.solve(b)

    def _jacobian(self, y, fy):
        eps = self.cfg.jacobian_epsilon * (1.0 + np.abs(y))
        probes = y[None, :] + np.diag(eps)
        return ((self.f(probes) - fy[None, :]) / eps[:, None]).T

    def _newton(self, c, b, guess):
        y = np.array(guess, dtype=np.float64, copy=True)
        n = y.shape[0]
        for _ in range(self.cfg.max_iterations):
            fy = _eval(self.f, y)
            resid = y - c * fy - b
            if np.max(np.abs(resid), initial=0.0) <= self.cfg.tolerance:
                return y
            J = np.eye(n) - c * self._jacobian(y, fy)
            try:
                y = y - scipy.linalg.solve(J, resid)
            except scipy.linalg.LinAlgError as exc:
                raise SolverError(f"singular Newton matrix: {exc}", residual=float(np.max(np.abs(resid))))
            if not np.all(np.isfinite(y)):
                raise DivergenceError("Newton iterate became non-finite")
        resid = y - c * _eval(self.f, y) - b
        final = float(np.max(np.abs(resid), initial=0.0))
        if final <= self.cfg.tolerance:
            return y
        raise SolverError(
            f"Newton did not converge in {self.cfg.max_iterations} iterations (residual {final:.3e})",
            residual=final,
        )


def backward_euler_step(f, x, dt, cfg=None, solver=None):
    solver = solver or _ImplicitSolver(f, cfg)
    x = np.asarray(x, dtype=np.float64)
    return solver.solve(dt, x, x)


def bdf2_step(f, x_prev2, x_prev1, dt, cfg=None, solver=None):
    """Solve ``x - 4/3 x_prev1 + 1/3 x_prev2 = 2/3 dt f(x)``."""
    solver = solver or _ImplicitSolver(f, cfg)
    x_prev1 = np.asarray(x_prev1, dtype=np.float64)
    b = (4.0 / 3.0) * x_prev1 - (1.0 / 3.0) * np.asarray(x_prev2, dtype=np.float64)
    return solver.solve((2.0 / 3.0) * dt, b, x_prev1)


class Stepper:
    """Advances a state by repeated fixed steps, keeping multistep history.

    Explicit stages are not checked individually; callers check the state
    after each step, which any non-finite stage value reaches anyway.
    """

    def __init__(self, rhs, kind, dt, nq=None, cfg=None, half_step_h4=False):
        self.f, owner = _rhs(rhs)
        self.kind = IntegratorKind.parse(kind)
        self.dt = float(dt)
        self.nq = nq if nq is not None else getattr(owner, "nq", None)
        self.half_step_h4 = half_step_h4
        self._prev = None
        self._solver = None
        if self.kind is IntegratorKind.LEAPFROG:
            if owner is not None and not getattr(owner, "separable", True):
                raise UnsupportedError("leapfrog requires a separable (q, p) system")
            if self.nq is None:
                raise UnsupportedError("leapfrog needs to know the size of q")
        if self.kind in (IntegratorKind.BACKWARD_EULER, IntegratorKind.BDF2):
            self._solver = _ImplicitSolver(rhs, cfg)

    def step(self, x):
        k = self.kind
        if k is IntegratorKind.FORWARD_EULER:
            y = x + self.dt * self.f(x)
        elif k is IntegratorKind.RK4:
            y = rk4_step(self.f, x, self.dt, self.half_step_h4, _ev=_raw)
        elif k is IntegratorKind.LEAPFROG:
            y = _leapfrog_packed(self.f, x, self.dt, self.nq, ev=_raw)
        elif k is IntegratorKind.BACKWARD_EULER or self._prev is None:
            # BDF2 starts with a single backward Euler step
            y = backward_euler_step(self.f, x, self.dt, solver=self._solver)
        else:
            y = bdf2_step(self.f, self._prev, x, self.dt, solver=self._solver)
        self._prev = x
        return y


def integrate_batch(system, integrator, x0, grid: TimeGrid, cfg=None, half_step_h4=False):
    """Integrate a batch of initial states ``(B, n)``.

    Returns ``(states, derivatives, seconds)`` with arrays of shape
    ``(count, B, n)``. Only every ``grid.subsample``-th inner state is kept.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    if x.ndim != 2:
        raise DimensionError("batched initial states must be 2-D")
    dim = getattr(system, "dim", None)
    if dim is not None and x.shape[1] != dim:
        raise DimensionError(f"initial state has {x.shape[1]} entries, system expects {dim}")
    stepper = Stepper(system, integrator, grid.inner_step, cfg=cfg, half_step_h4=half_step_h4)
    f = stepper.f
    states = np.empty((grid.count,) + x.shape)
    states[0] = x
    start = time.perf_counter()
    inner = 0
    for k in range(1, grid.count):
        for _ in range(grid.subsample):
            inner += 1
            try:
                x = stepper.step(x)
            except DivergenceError as exc:
                raise DivergenceError(f"diverged at inner step {inner}: {exc}", step=inner) from exc
            if not _all_finite(x):
                raise DivergenceError(f"non-finite state at inner step {inner}", step=inner)
        states[k] = x
    derivs = f(states.reshape(-1, x.shape[1])).reshape(states.shape)
    return states, derivs, time.perf_counter() - start


def integrate(system, integrator, x0, grid: TimeGrid, cfg=None, half_step_h4=False) -> Trajectory:
    """Integrate one initial state and return the stored trajectory."""
    x0 = np.asarray(x0, dtype=np.float64)
    states, derivs, seconds = integrate_batch(system, integrator, x0[None, :], grid, cfg, half_step_h4)
    return Trajectory(grid, states[:, 0], derivs[:, 0], nq=system.nq, gen_time_seconds=seconds)


def integrate_many(system, integrator, x0s, grid: TimeGrid, cfg=None) -> list[Trajectory]:
    """Integrate several initial states together; generation time is split evenly."""
    x0s = np.asarray(x0s, dtype=np.float64)
    states, derivs, seconds = integrate_batch(system, integrator, x0s, grid, cfg)
    per = seconds / max(len(x0s), 1)
    return [
        Trajectory(grid, states[:, i], derivs[:, i], nq=system.nq, gen_time_seconds=per)
        for i in range(x0s.shape[0])
    ]
