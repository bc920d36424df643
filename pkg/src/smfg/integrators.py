"""Adaptive time integrators for the flows.

Two self-contained schemes share one driver:

* ``rk45``: Dormand-Prince embedded 5(4) pair with proportional step control.
* ``implicit_euler``: backward Euler solved by damped Newton with a
  finite-difference Jacobian.  Local error is estimated from the difference
  between the implicit and explicit Euler increments.

Both reject (and halve) any step that makes a component listed in ``positive``
nonpositive.  Steps are truncated so that every record time is hit exactly.

``bdf`` hands the stepping to scipy's variable-order BDF and samples its dense
output at the record times.  It cannot reject a step for positivity, so a
density that turns nonpositive aborts the run instead.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

logger = logging.getLogger(__name__)

MIN_STEP = 1e-14


class Integrator(str, enum.Enum):
    RK45 = "rk45"
    IMPLICIT_EULER = "implicit_euler"
    BDF = "bdf"
    # each flow picks the scheme that handles it best
    AUTO = "auto"


@dataclass
class FlowConfig:
    t_max: float
    rtol: float = 1e-8
    atol: float = 1e-10
    residual_stop: float = 1e-9
    max_steps: int = 1_000_000
    record_every: float | None = None
    integrator: Integrator = Integrator.AUTO
    first_step: float | None = None
    # relative width of the band around p == q where the flows blend the
    # one-sided gradients of F^Q; 0 keeps the exact (discontinuous) selection
    tie_width: float = 1e-2

    def __post_init__(self):
        self.integrator = Integrator(self.integrator)
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if self.tie_width < 0:
            raise ValueError("tie_width must be nonnegative")
        if self.residual_stop < 0:
            raise ValueError("residual_stop must be nonnegative")
        if self.record_every is None:
            self.record_every = self.t_max / 100
        if not self.record_every > 0:
            raise ValueError("record_every must be positive")


class IntegrationError(RuntimeError):
    pass


class StiffnessError(IntegrationError):
    def __init__(self, t: float, dt: float):
        super().__init__(f"step size {dt:.3e} fell below {MIN_STEP:g} at t = {t:.6g}")
        self.t = t


class DivergenceError(IntegrationError):
    def __init__(self, t: float, what: str = "right-hand side became non-finite"):
        super().__init__(f"{what} at t = {t:.6g}")
        self.t = t


@dataclass
class IntegrationStats:
    steps: int = 0
    rejected: int = 0
    failed_solves: int = 0  # positivity, non-finite stage or Newton failure
    nfev: int = 0
    njev: int = 0
    newton_iterations: int = 0


@dataclass
class IntegrationResult:
    t: float
    y: np.ndarray
    record_times: list[float]
    record_states: list[np.ndarray]
    reason: str  # "t_max", "residual" or "max_steps"
    stats: IntegrationStats = field(default_factory=IntegrationStats)
    last_monitor: float = math.nan


# Dormand-Prince coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_LOW


def _error_norm(err, y0, y1, rtol, atol) -> float:
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale)) if err.size else 0.0


def _is_positive(y, positive) -> bool:
    return positive is None or bool(np.all(y[positive] > 0.0))


class _Counted:
    def __init__(self, fun, stats):
        self.fun = fun
        self.stats = stats

    def __call__(self, y):
        self.stats.nfev += 1
        return np.asarray(self.fun(y), dtype=float)


def _initial_step(fun, f0, y0, cfg: FlowConfig, interval: float, order: int, positive=None) -> float:
    """Starting step in the style of Hairer, Norsett and Wanner (II.4)."""
    if cfg.first_step is not None:
        return cfg.first_step
    if not y0.size:
        return interval
    scale = cfg.atol + cfg.rtol * np.abs(y0)
    d0 = float(np.max(np.abs(y0) / scale))
    d1 = float(np.max(np.abs(f0) / scale))
    if d1 <= 1e-12:
        return interval
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, interval)
    probe = y0 + h0 * f0
    if not _is_positive(probe, positive):
        return h0
    with np.errstate(all="ignore"):
        f1 = fun(probe)
    if not np.all(np.isfinite(f1)):
        return h0
    d2 = float(np.max(np.abs(f1 - f0) / scale)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, 1e-3 * h0)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1, interval)


class _RK45Stepper:
    order = 4

    def __init__(self, fun, cfg, positive):
        self.fun = fun
        self.cfg = cfg
        self.positive = positive
        self.k_first = None

    def start(self, y0):
        self.k_first = self.fun(y0)
        return self.k_first

    def try_step(self, y0, dt):
        """Return (y1, err_norm) or (None, None) if a stage left the admissible set."""
        ks = [self.k_first]
        for s in range(1, 7):
            ys = y0 + dt * sum(a * k for a, k in zip(_A[s], ks) if a != 0.0)
            if not _is_positive(ys, self.positive):
                return None, None
            # an oversized trial step may overflow; it is rejected below
            with np.errstate(over="ignore", invalid="ignore"):
                k = self.fun(ys)
            if not np.all(np.isfinite(k)):
                return None, None
            ks.append(k)
        y1 = ys  # the 7th stage argument is the 5th order solution
        err = dt * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
        self._pending = ks[-1]
        return y1, _error_norm(err, y0, y1, self.cfg.rtol, self.cfg.atol)

    def accept(self, y1):
        self.k_first = self._pending  # first-same-as-last

    def next_dt(self, dt, err):
        if err == 0.0:
            return dt * 5.0
        return dt * min(5.0, max(0.2, 0.9 * err ** (-1 / 5)))


def fd_jacobian(fun, y: np.ndarray, f0: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Dense forward-difference Jacobian, one column at a time."""
    n = y.size
    jac = np.empty((f0.size, n))
    for j in range(n):
        eps = _FD_REL * max(abs(y[j]), atol)
        yp = y.copy()
        yp[j] += eps
        jac[:, j] = (fun(yp) - f0) / eps
    return jac


_FD_REL = 1.5e-8


def greedy_column_groups(pattern: np.ndarray) -> list[np.ndarray]:
    """Split columns into groups whose nonzero rows are disjoint."""
    n_cols = pattern.shape[1]
    groups: list[list[int]] = []
    used: list[np.ndarray] = []
    for j in range(n_cols):
        rows = pattern[:, j]
        for g, mask in enumerate(used):
            if not np.any(mask & rows):
                groups[g].append(j)
                mask |= rows
                break
        else:
            groups.append([j])
            used.append(rows.copy())
    return [np.array(g) for g in groups]


def colored_fd_jacobian(fun, y, f0, pattern: np.ndarray, groups, atol: float = 1e-12, sparse: bool = False):
    """Forward-difference Jacobian with known sparsity ``pattern`` (rows x cols).

    Returns a dense array, or a CSC matrix when ``sparse`` is set.
    """
    rows_out, cols_out, vals = [], [], []
    for cols in groups:
        eps = _FD_REL * np.maximum(np.abs(y[cols]), atol)
        yp = y.copy()
        yp[cols] += eps
        df = fun(yp) - f0
        for j, e in zip(cols, eps):
            rows = np.flatnonzero(pattern[:, j])
            rows_out.append(rows)
            cols_out.append(np.full(rows.size, j))
            vals.append(df[rows] / e)
    shape = (f0.size, y.size)
    jac = scipy.sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows_out), np.concatenate(cols_out))), shape=shape
    )
    return jac if sparse else jac.toarray()


class DenseJacobian:
    def __init__(self, matrix: np.ndarray):
        self.matrix = matrix

    def factor(self, dt: float):
        lu = scipy.linalg.lu_factor(np.eye(self.matrix.shape[0]) - dt * self.matrix)
        return lambda rhs: scipy.linalg.lu_solve(lu, rhs)


class RankOneSparseJacobian:
    """J = S - e r^T with S sparse; used when a constraint couples one block globally.

    Systems (I - dt J) x = b are solved with a sparse LU of I - dt S and the
    Sherman-Morrison formula.
    """

    def __init__(self, sparse, e: np.ndarray, r: np.ndarray):
        self.sparse = scipy.sparse.csc_matrix(sparse)
        self.e = e
        self.r = r

    def factor(self, dt: float):
        n = self.sparse.shape[0]
        lu = scipy.sparse.linalg.splu(scipy.sparse.identity(n, format="csc") - dt * self.sparse)
        ae = lu.solve(self.e)
        denom = 1.0 + dt * float(self.r @ ae)

        def solve(rhs):
            x = lu.solve(rhs)
            return x - ae * (dt * float(self.r @ x) / denom)

        return solve


class _ImplicitEulerStepper:
    order = 1
    max_newton = 12

    def __init__(self, fun, cfg, positive, stats, jac):
        self.fun = fun
        self.cfg = cfg
        self.positive = positive
        self.stats = stats
        self.jac_fn = jac
        self.jac = None
        self.solver = None
        self.solver_dt = None
        self.f0 = None

    def start(self, y0):
        self.f0 = self.fun(y0)
        return self.f0

    def _refresh(self, y, f):
        self.stats.njev += 1
        if self.jac_fn is None:
            self.jac = DenseJacobian(fd_jacobian(self.fun, y, f, self.cfg.atol))
        else:
            jac = self.jac_fn(y, f)
            self.jac = DenseJacobian(jac) if isinstance(jac, np.ndarray) else jac
        self.solver = None

    def _solve(self, dt, rhs):
        if self.solver is None or self.solver_dt != dt:
            self.solver = self.jac.factor(dt)
            self.solver_dt = dt
        return self.solver(rhs)

    def _newton(self, y0, dt):
        """Newton for y = y0 + dt f(y) with Jacobian refresh on slow contraction."""
        scale = self.cfg.atol + self.cfg.rtol * np.abs(y0)
        y = y0.copy()
        f = self.f0
        res = -dt * f
        res_norm = float(np.linalg.norm(res / scale))
        last_step = math.inf
        refreshed_here = False
        for _ in range(self.max_newton):
            self.stats.newton_iterations += 1
            if self.jac is None:
                self._refresh(y, f)
                refreshed_here = True
            delta = -self._solve(dt, res)
            alpha = 1.0
            while True:
                trial = y + alpha * delta
                if _is_positive(trial, self.positive):
                    f_trial = self.fun(trial)
                    if np.all(np.isfinite(f_trial)):
                        res_trial = trial - y0 - dt * f_trial
                        trial_norm = float(np.linalg.norm(res_trial / scale))
                        if trial_norm <= (1.0 - 1e-4 * alpha) * res_norm or trial_norm < 1e-3:
                            break
                alpha *= 0.5
                if alpha < 1.0 / 64:
                    if refreshed_here:
                        return None
                    # the Jacobian is stale; retry from here with a fresh one
                    self.jac = None
                    break
            if self.jac is None:
                continue
            step = float(np.max(np.abs(alpha * delta) / scale))
            y, f, res, res_norm = trial, f_trial, res_trial, trial_norm
            if step <= _NEWTON_TOL:
                return y, f
            if alpha < 1.0 or step > 0.3 * last_step:
                self.jac = None
                refreshed_here = False
            last_step = step
        return None

    def try_step(self, y0, dt):
        out = self._newton(y0, dt)
        if out is None:
            self.jac = None
            return None, None
        y1, f1 = out
        self._pending = f1
        err = 0.5 * dt * (f1 - self.f0)
        return y1, _error_norm(err, y0, y1, self.cfg.rtol, self.cfg.atol)

    def accept(self, y1):
        self.f0 = self._pending

    def next_dt(self, dt, err):
        if err == 0.0:
            return dt * 4.0
        return dt * min(4.0, max(0.2, 0.9 / math.sqrt(err)))


_NEWTON_TOL = 1e-2


def integrate(
    rhs: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    cfg: FlowConfig,
    *,
    positive: np.ndarray | slice | None = None,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    monitor: Callable[[float, np.ndarray], float] | None = None,
    jac: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> IntegrationResult:
    """Integrate the autonomous system y' = rhs(y) from t = 0 to ``cfg.t_max``.

    ``project`` is applied to every accepted state; it must not change the
    value of ``rhs`` beyond rounding (e.g. removing a conserved constant mode).  ``monitor`` returns the
    steady-state residual of a state; integration stops once it drops to
    ``cfg.residual_stop`` or below.  ``jac(y, f(y))`` supplies the Jacobian
    for the implicit scheme; a dense finite-difference one is used otherwise.
    """
    stats = IntegrationStats()
    fun = _Counted(rhs, stats)
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    if not _is_positive(y, positive):
        raise ValueError("initial state violates positivity")
    if project is not None:
        y = project(y)
    if cfg.integrator is Integrator.BDF:
        return _integrate_bdf(fun, y, cfg, stats, positive, project, monitor, jac)

    if cfg.integrator is Integrator.RK45:
        stepper = _RK45Stepper(fun, cfg, positive)
    else:
        stepper = _ImplicitEulerStepper(fun, cfg, positive, stats, jac)

    f0 = stepper.start(y)
    if not np.all(np.isfinite(f0)):
        raise DivergenceError(0.0)

    t = 0.0
    rec_dt = cfg.record_every
    n_records = max(1, int(math.ceil(cfg.t_max / rec_dt - 1e-9)))
    record_times = [0.0]
    record_states = [y.copy()]
    next_index = 1

    def next_record_time():
        return min(cfg.t_max, next_index * rec_dt)

    last_monitor = monitor(t, y) if monitor is not None else math.nan
    if monitor is not None and last_monitor <= cfg.residual_stop:
        return IntegrationResult(t, y, record_times, record_states, "residual", stats, last_monitor)

    dt = _initial_step(fun, f0, y, cfg, next_record_time(), stepper.order, positive)
    reason = "t_max"
    while True:
        if stats.steps >= cfg.max_steps:
            reason = "max_steps"
            break
        target = next_record_time()
        remaining = target - t
        # stretch a step that would stop just short of the record time
        hit_target = dt >= remaining * (1.0 - 1e-9)
        dt_try = remaining if hit_target else dt
        if dt_try < MIN_STEP:
            raise StiffnessError(t, dt_try)
        y1, err = stepper.try_step(y, dt_try)
        if y1 is None:
            stats.rejected += 1
            stats.failed_solves += 1
            dt = 0.5 * dt_try
            continue
        if err > 1.0:
            stats.rejected += 1
            dt = stepper.next_dt(dt_try, err)
            continue
        # accepted
        stats.steps += 1
        t = target if hit_target else t + dt_try
        if t >= target:
            # t + dt_try rounded onto the record time
            t, hit_target = target, True
        stepper.accept(y1)
        if project is not None:
            y1 = project(y1)
        y = y1
        if not np.all(np.isfinite(y)):
            raise DivergenceError(t)
        new_dt = stepper.next_dt(dt_try, err)
        dt = max(new_dt, dt) if hit_target and dt_try < dt else new_dt
        if hit_target:
            record_times.append(t)
            record_states.append(y.copy())
            next_index += 1
        if monitor is not None:
            last_monitor = monitor(t, y)
            if last_monitor <= cfg.residual_stop:
                reason = "residual"
                break
        if hit_target and next_index > n_records:
            break
    if record_times[-1] != t:
        record_times.append(t)
        record_states.append(y.copy())
    logger.debug("integration finished at t=%g (%s): %s", t, reason, stats)
    return IntegrationResult(t, y, record_times, record_states, reason, stats, last_monitor)


def _integrate_bdf(fun, y, cfg, stats, positive, project, monitor, jac) -> IntegrationResult:
    jac_fn = None if jac is None else (lambda t, z: jac(z, fun(z)))
    solver = scipy.integrate.BDF(
        lambda t, z: fun(z), 0.0, y, cfg.t_max, rtol=cfg.rtol, atol=cfg.atol,
        jac=jac_fn, first_step=cfg.first_step,
    )
    rec_dt = cfg.record_every
    record_times = [0.0]
    record_states = [y.copy()]
    next_index = 1
    last_monitor = monitor(0.0, y) if monitor is not None else math.nan
    if monitor is not None and last_monitor <= cfg.residual_stop:
        return IntegrationResult(0.0, y, record_times, record_states, "residual", stats, last_monitor)

    def finish(state):
        return state if project is None else project(state)

    reason = "t_max"
    while solver.status == "running":
        if stats.steps >= cfg.max_steps:
            reason = "max_steps"
            break
        message = solver.step()
        if solver.status == "failed":
            raise StiffnessError(solver.t, solver.step_size) if "step size" in str(message) else \
                IntegrationError(f"BDF failed at t = {solver.t:.6g}: {message}")
        stats.steps += 1
        if not np.all(np.isfinite(solver.y)):
            raise DivergenceError(solver.t)
        if not _is_positive(solver.y, positive):
            raise DivergenceError(solver.t, "density became nonpositive")
        # record times strictly inside the run; t_max itself is appended below
        slack = 1e-12 * cfg.t_max
        if next_index * rec_dt <= solver.t + slack and next_index * rec_dt < cfg.t_max - slack:
            dense = solver.dense_output()
            while next_index * rec_dt <= solver.t + slack and next_index * rec_dt < cfg.t_max - slack:
                record_times.append(next_index * rec_dt)
                record_states.append(finish(dense(next_index * rec_dt)))
                next_index += 1
        if monitor is not None:
            last_monitor = monitor(solver.t, finish(solver.y.copy()))
            if last_monitor <= cfg.residual_stop:
                reason = "residual"
                break
    t = solver.t
    y = finish(solver.y.copy())
    if record_times[-1] < t:
        record_times.append(t)
        record_states.append(y.copy())
    stats.njev = solver.njev
    logger.debug("integration finished at t=%g (%s): %s", t, reason, stats)
    return IntegrationResult(t, y, record_times, record_states, reason, stats, last_monitor)
