"""Shared numerical kernels: damped Newton, adaptive implicit ODE stepper,
small dense linear solver, running time-integral accumulator.

All kernels are pure (state in, state out) and hold no module-level state,
so independent problems can run on separate threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NumericsError(Exception):
    pass


class NonConvergence(NumericsError):
    def __init__(self, iterations: int, final_norm: float):
        self.iterations = iterations
        self.final_norm = final_norm
        super().__init__(f"no convergence after {iterations} iterations "
                         f"(residual norm {final_norm:.3e})")


class SingularJacobian(NumericsError):
    def __init__(self, pivot_index: int):
        self.pivot_index = pivot_index
        super().__init__(f"singular Jacobian at pivot {pivot_index}")


class NonFiniteResidual(NumericsError):
    pass


class SingularMatrix(NumericsError):
    def __init__(self, pivot_index: int):
        self.pivot_index = pivot_index
        super().__init__(f"singular matrix at pivot {pivot_index}")


class StepUnderflow(NumericsError):
    def __init__(self, t: float, step: float, min_step: float):
        self.t = t
        self.step = step
        super().__init__(f"required step {step:.3e} below min_step "
                         f"{min_step:.3e} at t={t:.6g}")


class NonFiniteDerivative(NumericsError):
    def __init__(self, t: float, channel: int):
        self.t = t
        self.channel = channel
        super().__init__(f"non-finite derivative in channel {channel} at t={t:.6g}")


class TimeReversal(NumericsError):
    pass


@dataclass
class NewtonOptions:
    max_iterations: int = 30
    relative_tolerance: float = 1e-10
    jacobian_perturbation: float = 1e-6  # relative FD step, absolute floor 1e-9
    damping_min: float = 1.0 / 64.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.relative_tolerance <= 0 or self.jacobian_perturbation <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.damping_min <= 1:
            raise ValueError("damping_min must lie in (0, 1]")


def solve_dense(matrix, rhs):
    """Solve A x = b by Gaussian elimination with partial pivoting (n <= 16)."""
    a = np.array(matrix, dtype=float)
    b = np.array(rhs, dtype=float)
    n = b.size
    if a.shape != (n, n):
        raise ValueError(f"matrix shape {a.shape} does not match rhs size {n}")
    if n > 16:
        raise ValueError("solve_dense is meant for small systems (n <= 16)")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if a[p, k] == 0.0:
            raise SingularMatrix(k)
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        f = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(f, a[k, k:])
        b[k + 1:] -= f * b[k]
    if a[n - 1, n - 1] == 0.0:
        raise SingularMatrix(n - 1)
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - a[i, i + 1:] @ x[i + 1:]) / a[i, i]
    return x


def _fd_jacobian(residual_fn, x, r0, pert):
    n = x.size
    jac = np.empty((r0.size, n))
    for j in range(n):
        dx = max(pert * abs(x[j]), 1e-9)
        xp = x.copy()
        xp[j] += dx
        rp = np.asarray(residual_fn(xp), dtype=float)
        jac[:, j] = (rp - r0) / dx
    return jac


def newton_solve(residual_fn, guess, opts: NewtonOptions | None = None, scale=None):
    """Damped Newton root find for a square system.

    `scale` holds per-equation reference magnitudes so mixed-unit residuals
    are commensurate; convergence is on max |r_i / scale_i|.
    """
    opts = opts or NewtonOptions()
    x = np.array(guess, dtype=float)

    r = np.asarray(residual_fn(x), dtype=float)
    if r.size != x.size:
        raise ValueError("residual dimension does not match guess dimension")
    if not np.all(np.isfinite(r)):
        raise NonFiniteResidual("residual not finite at initial guess")
    if scale is None:
        scale = np.maximum(np.abs(r), 1.0)
    else:
        scale = np.asarray(scale, dtype=float)

    def norm(rv):
        return float(np.max(np.abs(rv / scale)))

    rn = norm(r)
    for it in range(1, opts.max_iterations + 1):
        if rn < opts.relative_tolerance:
            return x
        jac = _fd_jacobian(residual_fn, x, r, opts.jacobian_perturbation)
        if not np.all(np.isfinite(jac)):
            raise NonFiniteResidual(f"non-finite Jacobian at iteration {it}")
        try:
            dx = solve_dense(jac, -r)
        except SingularMatrix as exc:
            raise SingularJacobian(exc.pivot_index) from exc
        alpha = 1.0
        while True:
            xt = x + alpha * dx
            rt = np.asarray(residual_fn(xt), dtype=float)
            rtn = norm(rt) if np.all(np.isfinite(rt)) else math.inf
            if rtn < rn or alpha <= opts.damping_min:
                break
            alpha *= 0.5
        x, r, rn = xt, rt, rtn
        if not math.isfinite(rn):
            raise NonFiniteResidual(f"residual not finite at iteration {it}")
    if rn < opts.relative_tolerance:
        return x
    raise NonConvergence(opts.max_iterations, rn)


@dataclass
class StepperOptions:
    relative_tolerance: float = 1e-6
    absolute_tolerance: float | np.ndarray = 1e-9  # scalar or per-channel vector
    initial_step: float = 1e-4
    min_step: float = 1e-13
    max_step: float = math.inf

    def __post_init__(self):
        if self.relative_tolerance <= 0:
            raise ValueError("relative_tolerance must be positive")
        if np.any(np.asarray(self.absolute_tolerance) <= 0):
            raise ValueError("absolute_tolerance must be positive")
        if not 0 < self.min_step <= self.initial_step <= self.max_step:
            raise ValueError("need 0 < min_step <= initial_step <= max_step")


@dataclass
class IntegrationResult:
    t: float
    state: np.ndarray
    times: np.ndarray
    states: np.ndarray
    last_step: float
    accepted: int
    rejected: int


# TR-BDF2 constants (one-step implicit: trapezoidal stage + BDF2 corrector,
# both stages share the iteration matrix I - d*h*J).
_GAMMA = 2.0 - math.sqrt(2.0)
_D = _GAMMA / 2.0
_C1 = 1.0 / (_GAMMA * (2.0 - _GAMMA))
_C0 = (1.0 - _GAMMA) ** 2 / (_GAMMA * (2.0 - _GAMMA))
# quadrature weights of the embedded third-order solution at nodes 0, gamma, 1
_W0 = 0.5 - 1.0 / (6.0 * _GAMMA)
_WG = 1.0 / (6.0 * _GAMMA * (1.0 - _GAMMA))
_W1 = (2.0 - 3.0 * _GAMMA) / (6.0 * (1.0 - _GAMMA))

_NEWTON_MAX = 7


def _check_finite(f, t):
    if not np.all(np.isfinite(f)):
        bad = int(np.argmax(~np.isfinite(f)))
        raise NonFiniteDerivative(t, bad)


def integrate_adaptive(deriv_fn, state0, t_span, opts: StepperOptions | None = None,
                       observers=(), record=True):
    """Adaptive implicit integration of dy/dt = f(t, y) over t_span.

    A step is accepted iff every channel satisfies
    |err_i| <= atol_i + rtol*|y_i|; observers are invoked on each accepted
    step; the final step is clipped so the end time is exactly t_span[1].
    """
    opts = opts or StepperOptions()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must satisfy t1 > t0")
    y = np.array(state0, dtype=float)
    n = y.size
    atol = np.broadcast_to(np.asarray(opts.absolute_tolerance, dtype=float), (n,))
    rtol = opts.relative_tolerance

    t = t0
    f0 = np.asarray(deriv_fn(t, y), dtype=float)
    _check_finite(f0, t)

    times = [t] if record else None
    states = [y.copy()] if record else None

    h = min(opts.initial_step, opts.max_step, t1 - t0)
    minv = None        # inverse iteration matrix and the h it was built for
    jac = None
    jac_fresh = False
    accepted = rejected = 0
    eye = np.eye(n)

    def stage_solve(tt, z0, rhs_const, hval, wt):
        # solve z = rhs_const + d*h*f(tt, z) by simplified Newton; both the
        # displacement and the raw residual must shrink, else a stale
        # iteration matrix could stall on a small-step fixed point silently
        z = z0.copy()
        dh = _D * hval
        for _ in range(_NEWTON_MAX):
            fz = np.asarray(deriv_fn(tt, z), dtype=float)
            res = rhs_const + dh * fz - z
            dz = minv @ res
            z = z + dz
            if (np.max(np.abs(dz) / wt) < 0.03
                    and np.max(np.abs(res) / wt) < 0.5):
                return z, fz
        return None, None

    while t < t1:
        remaining = t1 - t
        final = h >= 0.9 * remaining
        if final:
            h = remaining      # stretch/clip so the last step lands exactly on t1
        elif h < opts.min_step:
            raise StepUnderflow(t, h, opts.min_step)
        if jac is None:
            jac = _fd_jacobian(lambda yy: np.asarray(deriv_fn(t, yy), dtype=float),
                               y, f0, 1e-7)
            if not np.all(np.isfinite(jac)):
                bad_row = int(np.argmax((~np.isfinite(jac)).any(axis=1)))
                raise NonFiniteDerivative(t, bad_row)
            jac_fresh = True
            minv = np.linalg.inv(eye - (_D * h) * jac)
            h_lu = h
        elif minv is None or abs(h / h_lu - 1.0) > 0.2:
            minv = np.linalg.inv(eye - (_D * h) * jac)
            h_lu = h

        wt = atol + rtol * np.abs(y)
        tg = t + _GAMMA * h
        # trapezoidal stage
        g1, fg = stage_solve(tg, y + (_GAMMA * h) * f0, y + (_D * h) * f0, h, wt)
        if g1 is not None:
            # BDF2 stage
            y1, f1 = stage_solve(t + h, g1, _C1 * g1 - _C0 * y, h, wt)
        if g1 is None or y1 is None:
            if not jac_fresh:
                jac = None      # refresh Jacobian and retry at same h
            else:
                h *= 0.25
                minv = None
                rejected += 1
            continue
        # embedded third-order error estimate, filtered through the stage matrix
        est = minv @ (y + h * (_W0 * f0 + _WG * fg + _W1 * f1) - y1)
        err = float(np.max(np.abs(est) / wt))
        if err <= 1.0:
            t += h
            # propagate the locally-extrapolated value; the second filter pass
            # keeps the correction damped at infinity (|R| < 1 on the real axis)
            y = y1 + minv @ est
            f0 = np.asarray(deriv_fn(t, y), dtype=float)
            if not math.isfinite(float(np.sum(f0))):
                _check_finite(f0, t)
            jac_fresh = False
            accepted += 1
            for obs in observers:
                obs(t, y)
            if record:
                times.append(t)
                states.append(y.copy())
            fac = 0.9 * err ** (-1.0 / 3.0) if err > 0 else 5.0
            h = min(h * min(5.0, max(0.3, fac)), opts.max_step)
            if accepted % 25 == 0:
                jac = None      # periodic refresh keeps stale Jacobians at bay
        else:
            rejected += 1
            if not math.isfinite(err):
                _check_finite(f1, t + h)
                _check_finite(fg, tg)
            h *= max(0.1, 0.9 * err ** (-1.0 / 3.0)) if math.isfinite(err) else 0.25
            if not jac_fresh:
                jac = None      # a stale Jacobian degrades the error filter too

    return IntegrationResult(
        t=t, state=y,
        times=np.asarray(times) if record else np.empty(0),
        states=np.asarray(states) if record else np.empty((0, n)),
        last_step=h, accepted=accepted, rejected=rejected)


def _lu_factor(m):
    """Partial-pivot LU; returns (lu, piv) for _lu_solve."""
    a = m.copy()
    n = a.shape[0]
    piv = np.arange(n)
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if a[p, k] == 0.0:
            raise SingularMatrix(k)
        if p != k:
            a[[k, p]] = a[[p, k]]
            piv[[k, p]] = piv[[p, k]]
        a[k + 1:, k] /= a[k, k]
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    if a[n - 1, n - 1] == 0.0:
        raise SingularMatrix(n - 1)
    return a, piv


def _lu_solve(lu, b):
    a, piv = lu
    n = a.shape[0]
    x = b[piv].astype(float)
    for i in range(1, n):
        x[i] -= a[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - a[i, i + 1:] @ x[i + 1:]) / a[i, i]
    return x


@dataclass
class IntegralAccumulator:
    """Trapezoidal running integral of a sampled signal."""
    last_time: float
    last_sample: float
    value: float = 0.0

    def reset(self, t: float, sample: float):
        self.last_time = t
        self.last_sample = sample
        self.value = 0.0


def accumulate(acc: IntegralAccumulator, t: float, sample: float) -> IntegralAccumulator:
    """Advance the accumulator to time t with the new sample (trapezoid rule)."""
    if t < acc.last_time:
        raise TimeReversal(f"t={t} precedes accumulator time {acc.last_time}")
    acc.value += 0.5 * (sample + acc.last_sample) * (t - acc.last_time)
    acc.last_time = t
    acc.last_sample = sample
    return acc
