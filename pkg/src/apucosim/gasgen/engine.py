"""Discrete state-space wrapper around the cycle: explicit state update,
output projection and steady-state initialization.

The single state is spool speed; update and output are pure functions of
(state, input, health, shaft load), which is what makes external state
processing (noise injection, Monte Carlo) possible between the two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cycle import (
    CycleSolution,
    GasGenInput,
    GasGenParams,
    HEALTHY,
    HealthParams,
    off_design_solve,
)

MACRO_DT = 0.02          # s, fixed gas-generator step
_SUBSTEPS = 2            # forward sub-steps per macro step


class SpeedOutOfRange(Exception):
    def __init__(self, n, n_max):
        super().__init__(f"spool speed {n:.0f} rpm outside (0, {n_max:.0f}] rpm")


class NoSteadyState(Exception):
    pass


@dataclass(frozen=True)
class GasGenState:
    N: float      # spool speed, rpm

    def __post_init__(self):
        if self.N <= 0:
            raise ValueError("spool speed must be positive")


# output channel list mirrors the reference deck's design-point table,
# including its unit strings
OUTPUT_CHANNELS = (
    ("XNHPC", "r/min"), ("PWSD", "kW"), ("SFC", "kg/(kW.h)"), ("SNOx", "/"),
    ("HPCSM", "/"),
    ("T1", "K"), ("P1", "kPa"), ("T2", "K"), ("P2", "kPa"), ("W2", "kg/s"),
    ("T3", "K"), ("P3", "kPa"), ("Ps3", "kPa"), ("W3", "kg/s"),
    ("T4", "K"), ("P4", "kPa"), ("W4", "kg/s"),
    ("T41", "K"), ("W41", "kg/s"),
    ("T5", "K"), ("P5", "kPa"), ("W5", "kg/s"),
    ("T8", "K"), ("P8", "kPa"), ("W8", "kg/s"),
)
OUTPUT_NAMES = tuple(name for name, _ in OUTPUT_CHANNELS)


def outputs_from_solution(sol: CycleSolution) -> dict:
    st = sol.stations
    return {
        "XNHPC": sol.N, "PWSD": sol.PW_shaft_net, "SFC": sol.SFC,
        "SNOx": sol.NOx_severity, "HPCSM": sol.surge_margin,
        "T1": st[1].Tt, "P1": st[1].Pt, "T2": st[2].Tt, "P2": st[2].Pt,
        "W2": st[2].W, "T3": st[3].Tt, "P3": st[3].Pt, "Ps3": sol.Ps3,
        "W3": st[3].W, "T4": st[4].Tt, "P4": st[4].Pt, "W4": st[4].W,
        "T41": st[41].Tt, "W41": st[41].W, "T5": st[5].Tt, "P5": st[5].Pt,
        "W5": st[5].W, "T8": st[8].Tt, "P8": st[8].Pt, "W8": st[8].W,
    }


def _dn_dt(params: GasGenParams, pw_net_kw: float, pe_kw: float, n_rpm: float) -> float:
    """Spool acceleration in rpm/s from the power surplus."""
    return ((pw_net_kw - pe_kw) * 1000.0 * (30.0 / math.pi) ** 2
            / (params.inertia * n_rpm))


def state_update(params: GasGenParams, x: GasGenState, u: GasGenInput,
                 health: HealthParams = HEALTHY, Pe: float = 0.0,
                 dt: float = MACRO_DT, guess=None) -> GasGenState:
    """Advance spool speed over one macro step (two forward sub-steps)."""
    n = x.N
    n_max = 1.2 * params.design_speed
    sub = dt / _SUBSTEPS
    for _ in range(_SUBSTEPS):
        sol = off_design_solve(params, u, health, Pe=Pe, N=n, guess=guess)
        guess = np.array([sol.beta, sol.turbine_pr / params.tmap.pr_design])
        n = n + _dn_dt(params, sol.PW_shaft_net, Pe, n) * sub
        if not 0.0 < n <= n_max:
            raise SpeedOutOfRange(n, n_max)
    return GasGenState(N=n)


def output(params: GasGenParams, x: GasGenState, u: GasGenInput,
           health: HealthParams = HEALTHY, Pe: float = 0.0, guess=None,
           noise_std: dict | None = None, rng=None) -> tuple[dict, CycleSolution]:
    """Project the converged cycle onto the output channels (optional noise)."""
    sol = off_design_solve(params, u, health, Pe=Pe, N=x.N, guess=guess)
    out = outputs_from_solution(sol)
    if noise_std:
        if rng is None:
            raise ValueError("noise requires a seeded generator")
        for name, std in noise_std.items():
            if std:
                out[name] = out[name] + rng.normal(0.0, std)
    return out, sol


def trim_fuel(params: GasGenParams, N: float, Pe: float,
              health: HealthParams = HEALTHY, altitude: float = 0.0,
              mach: float = 0.0, dT_ISA: float = 5.0) -> float:
    """Fuel flow at which the engine delivers Pe kW at speed N (steady)."""
    wf = params.wf_design * max(Pe + params.accessory_kw, 20.0) / (
        params.pe_design + params.accessory_kw)
    for _ in range(60):
        u = GasGenInput(wf=wf, altitude=altitude, mach=mach, dT_ISA=dT_ISA)
        sol = off_design_solve(params, u, health, Pe=Pe, N=N)
        err = sol.PW_shaft_net - Pe
        if abs(err) < 1e-9 * max(abs(Pe), 1.0):
            return wf
        dwf = 1e-6 * params.wf_design
        u2 = GasGenInput(wf=wf + dwf, altitude=altitude, mach=mach, dT_ISA=dT_ISA)
        slope = (off_design_solve(params, u2, health, Pe=Pe, N=N).PW_shaft_net
                 - sol.PW_shaft_net) / dwf
        wf = wf - err / slope
        if wf <= 0:
            raise NoSteadyState(f"no positive fuel flow delivers {Pe} kW at {N} rpm")
    raise NoSteadyState(f"fuel trim did not converge for {Pe} kW at {N} rpm")


def init(params: GasGenParams, u: GasGenInput, health: HealthParams = HEALTHY,
         Pe: float | None = None, load_law=None) -> tuple[GasGenState, dict, CycleSolution]:
    """Steady state: spool speed where delivered power meets the load.

    Provide either a fixed shaft power Pe or a load_law(N)->kW callable
    (e.g. a cubic speed law).
    """
    if (Pe is None) == (load_law is None):
        raise ValueError("provide exactly one of Pe or load_law")
    law = (lambda n: Pe) if load_law is None else load_law

    def surplus(n):
        sol = off_design_solve(params, u, health, Pe=law(n), N=n)
        return sol.PW_shaft_net - law(n), sol

    n_lo, n_hi = 0.55 * params.design_speed, 1.15 * params.design_speed
    ns = np.linspace(n_lo, n_hi, 13)
    vals = []
    for n in ns:
        try:
            vals.append((n, surplus(n)[0]))
        except Exception:
            vals.append((n, None))
    brackets = [(n1, s1, n2, s2)
                for (n1, s1), (n2, s2) in zip(vals, vals[1:])
                if s1 is not None and s2 is not None and s1 * s2 <= 0.0]
    if not brackets:
        raise NoSteadyState("no speed bracket where delivered power meets the load")
    # prefer the stable equilibrium (surplus falls through zero as N rises)
    stable = [b for b in brackets if b[1] >= 0.0 >= b[3]]
    bracket = (stable or brackets)[-1]
    n1, s1, n2, s2 = bracket
    for _ in range(80):
        n_mid = n1 - s1 * (n2 - n1) / (s2 - s1)
        if not n1 < n_mid < n2:
            n_mid = 0.5 * (n1 + n2)
        s_mid, sol = surplus(n_mid)
        if abs(s_mid) < 1e-9 * max(abs(law(n_mid)), 1.0):
            x = GasGenState(N=n_mid)
            return x, outputs_from_solution(sol), sol
        if s_mid * s1 <= 0.0:
            n2, s2 = n_mid, s_mid
        else:
            n1, s1 = n_mid, s_mid
    raise NoSteadyState("steady-state speed search did not converge")
