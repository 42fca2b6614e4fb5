"""Multi-loop dq0 model of the wound-rotor synchronous starter/generator
with an injectable stator turn-to-turn short-circuit branch.

Generator sign convention: stator current flows out of the machine, so
stator self-inductance terms enter the flux-current map with negative sign.
State vector (8): [lam_q, lam_d, lam_0, lam_fd, lam_kd, lam_kq, lam_f, theta_e]
where lam_f is the flux linkage of the shorted sub-winding and theta_e the
electrical rotor angle.

The shorted fraction mu of phase a carries (i_a - i_f); its flux linkage is
the proportional share of the phase-a linkage plus the sub-winding leakage
contribution of the circulating current:

    lam_f = mu * lam_a + mu * (1 - mu) * L_ls * i_f

The leakage term is what closes the 7x7 flux-current system; without it the
fault row is a linear combination of the stator rows and i_f is
indeterminate.  With i_f = 0 the closure reduces to the pure proportional
share.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import SingularMatrix, solve_dense
from .park import park_column_a, phase_a_row

# fault-resistance factor at or above this value means the branch is open
OPEN_BRANCH_KRF = 1e6

IDX_LAM_Q, IDX_LAM_D, IDX_LAM_0 = 0, 1, 2
IDX_LAM_FD, IDX_LAM_KD, IDX_LAM_KQ = 3, 4, 5
IDX_LAM_F, IDX_THETA = 6, 7
STATE_NAMES = ("lam_q", "lam_d", "lam_0", "lam_fd", "lam_kd", "lam_kq",
               "lam_f", "theta_e")


class SingularSystem(Exception):
    pass


@dataclass(frozen=True)
class WrsgParams:
    """Machine constants; defaults are the 225 kW / 400 Hz reference set."""
    P_n: float = 225.0            # kW rated (per machine)
    V_phase_rated: float = 230.0  # V rms phase, regulator setpoint
    f_n: float = 400.0            # Hz
    r_s: float = 0.0044           # stator phase resistance, ohm
    L_ls: float = 19.8e-6         # stator leakage, H
    L_md: float = 0.221e-3        # d-axis magnetizing, H
    L_mq: float = 0.162e-3        # q-axis magnetizing, H
    r_fd: float = 68.9e-3         # field resistance, ohm
    L_lf: float = 32.8e-6         # field leakage, H
    r_kd: float = 0.0142          # d damper resistance, ohm
    L_lkd: float = 34.1e-6        # d damper leakage, H
    r_kq: float = 0.0031          # q damper resistance, ohm
    L_lkq: float = 0.144e-3       # q damper leakage, H
    pole_pairs: int = 2
    eta_sg: float = 0.95          # electrical-to-shaft efficiency
    two_machine_factor: float = 2.0
    L_0: float | None = None      # zero-sequence inductance, defaults to L_ls

    def __post_init__(self):
        for name in ("r_s", "L_ls", "L_md", "L_mq", "r_fd", "L_lf", "r_kd",
                     "L_lkd", "r_kq", "L_lkq"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.pole_pairs < 1:
            raise ValueError("pole_pairs must be >= 1")

    @property
    def zero_seq_inductance(self) -> float:
        return self.L_ls if self.L_0 is None else self.L_0


@dataclass(frozen=True)
class FaultParams:
    """Stator turn-to-turn short: mu = shorted-turn fraction of phase a,
    k_rf = fault-branch resistance factor (r_f = k_rf * mu * r_s)."""
    mu: float = 0.0
    k_rf: float = OPEN_BRANCH_KRF

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.k_rf < 0.0:
            raise ValueError("k_rf must be non-negative")

    @property
    def active(self) -> bool:
        return self.mu > 0.0 and self.k_rf < OPEN_BRANCH_KRF

    def r_f(self, r_s: float) -> float:
        return self.k_rf * self.mu * r_s

    def r_sa_f(self, r_s: float) -> float:
        return self.mu * r_s


HEALTHY_FAULT = FaultParams()


@dataclass(frozen=True)
class WrsgState:
    lam_q: float = 0.0
    lam_d: float = 0.0
    lam_0: float = 0.0
    lam_fd: float = 0.0
    lam_kd: float = 0.0
    lam_kq: float = 0.0
    lam_f: float = 0.0
    theta_e: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.lam_q, self.lam_d, self.lam_0, self.lam_fd,
                         self.lam_kd, self.lam_kq, self.lam_f, self.theta_e])

    @staticmethod
    def from_array(y) -> "WrsgState":
        return WrsgState(*[float(v) for v in y])


@dataclass(frozen=True)
class InductanceModel:
    """The 6x6 flux-current matrix, its inverse, and fault-coupling pieces."""
    L: np.ndarray
    L_inv: np.ndarray
    L_ls: float
    params: WrsgParams

    @staticmethod
    def selector_k1() -> np.ndarray:
        return np.vstack([np.eye(3), np.zeros((3, 3))])

    def fault_column(self, theta: float) -> np.ndarray:
        """K_1 T_(c,1): qd0 image of a unit phase-a fault current."""
        col = np.zeros(6)
        col[:3] = park_column_a(theta)
        return col


def build_L(params: WrsgParams, extra_stator_inductance: float = 0.0) -> InductanceModel:
    """Assemble the 6x6 inductance matrix (generator sign convention).

    extra_stator_inductance folds a series load inductance into the stator
    self terms so a machine + series-RL circuit stays a plain ODE.
    """
    lmd, lmq = params.L_md, params.L_mq
    lq = lmq + params.L_ls
    ld = lmd + params.L_ls
    l0 = params.zero_seq_inductance
    le = extra_stator_inductance
    m = np.array([
        [-(lq + le), 0.0, 0.0, 0.0, 0.0, lmq],
        [0.0, -(ld + le), 0.0, lmd, lmd, 0.0],
        [0.0, 0.0, -(l0 + le), 0.0, 0.0, 0.0],
        [0.0, -lmd, 0.0, lmd + params.L_lf, lmd, 0.0],
        [0.0, -lmd, 0.0, lmd, lmd + params.L_lkd, 0.0],
        [-lmq, 0.0, 0.0, 0.0, 0.0, lmq + params.L_lkq],
    ])
    det = np.linalg.det(m)
    if abs(det) < 1e-40:
        raise SingularSystem("inductance matrix is singular")
    return InductanceModel(L=m, L_inv=np.linalg.inv(m), L_ls=params.L_ls,
                           params=params)


def fault_current_from_state(y, fault: FaultParams, model: InductanceModel) -> float:
    """Closed-form i_f from the sub-winding flux closure (0 when inactive)."""
    if not fault.active:
        return 0.0
    lam_a = float(phase_a_row(y[IDX_THETA]) @ y[:3])
    mu = fault.mu
    return (y[IDX_LAM_F] - mu * lam_a) / (mu * (1.0 - mu) * model.L_ls)


def currents_from_flux(state: WrsgState, fault: FaultParams,
                       model: InductanceModel) -> np.ndarray:
    """Solve the 7x7 linear system for (i_q, i_d, i_0, i_fd, i_kd, i_kq, i_f).

    Rows 1-6 are the flux-current map with the fault MMF correction; row 7 is
    the sub-winding flux closure.  With the branch open the system decouples
    and i_f = 0.
    """
    y = state.as_array()
    lam6 = y[:6]
    if not fault.active:
        i6 = model.L_inv @ lam6
        return np.append(i6, 0.0)
    theta = y[IDX_THETA]
    mu = fault.mu
    col = model.fault_column(theta)
    a_row = phase_a_row(theta)
    a = np.zeros((7, 7))
    a[:6, :6] = model.L
    a[:6, 6] = -mu * (model.L @ col)
    a[6, :6] = mu * (a_row @ model.L[:3, :])
    a[6, 6] = mu * (1.0 - mu) * model.L_ls - mu * mu * float(a_row @ model.L[:3, :] @ col)
    b = np.append(lam6, y[IDX_LAM_F])
    try:
        return solve_dense(a, b)
    except SingularMatrix as exc:
        raise SingularSystem("fault-loop system is singular") from exc


def currents_fast(y, fault: FaultParams, model: InductanceModel):
    """Hot-path equivalent of currents_from_flux on a raw state array.

    Uses i = L^-1 lam + mu * [T_c1; 0] * i_f, which is the exact closed-form
    reduction of the 7x7 system (pinned by test against solve_dense).
    """
    i_f = fault_current_from_state(y, fault, model)
    i6 = model.L_inv @ y[:6]
    if i_f != 0.0:
        i6 = i6 + (fault.mu * i_f) * model.fault_column(y[IDX_THETA])
    return i6, i_f
