"""Machine + load dynamics: the flux-linkage ODE, terminal quantities,
mechanical-power bookkeeping and the healthy steady-state solver.

An ElectricalSystem freezes everything constant over an integration segment
(speed, field voltage, load resistance, fault descriptor, held equation
noise) and exposes a fast derivative closure for the stepper plus terminal
evaluation for observers.
"""
from __future__ import annotations

import math

import numpy as np

from .loads import LoadModel
from .machine import (
    FaultParams,
    HEALTHY_FAULT,
    IDX_THETA,
    InductanceModel,
    WrsgParams,
    WrsgState,
    build_L,
    currents_fast,
)
from .park import inverse_park_matrix

_SHIFT = 2.0 * math.pi / 3.0


def mech_power(v_abc, i_abc, i_f: float, fault: FaultParams,
               params: WrsgParams) -> tuple[float, float]:
    """Total mechanical power drawn from the shaft (both machines) and the
    fault-branch extra loss, kW.

    P_total = 2 (v.i + i_f^2 r_f + (i_a - i_f)^2 r_saf - i_a^2 r_saf) / eta_sg
    """
    r_f = fault.r_f(params.r_s)
    r_saf = fault.r_sa_f(params.r_s)
    i_a = float(i_abc[0])
    p_elec = float(np.dot(v_abc, i_abc))
    p_fault = i_f * i_f * r_f + (i_a - i_f) ** 2 * r_saf - i_a * i_a * r_saf
    p_total = params.two_machine_factor * (p_elec + p_fault) / params.eta_sg
    p_loss = params.two_machine_factor * p_fault / params.eta_sg
    return p_total * 1e-3, p_loss * 1e-3


class ElectricalSystem:
    """Constant-coefficient wrapper for one integration segment."""

    def __init__(self, params: WrsgParams, load: LoadModel, fault: FaultParams,
                 w_e: float, V_fd: float, R_load: float,
                 noise_w=None):
        self.params = params
        self.load = load
        self.fault = fault
        self.w_e = w_e
        self.V_fd = V_fd
        self.R_load = R_load
        self.model: InductanceModel = build_L(params, load.L_phase)
        self.machine_model: InductanceModel = (
            self.model if load.L_phase == 0.0 else build_L(params))
        self.noise_w = np.zeros(6) if noise_w is None else np.asarray(noise_w, float)
        self._has_noise = bool(np.any(self.noise_w))
        p = params
        self._r_stator = R_load + p.r_s
        self._r_rotor = np.array([p.r_fd, p.r_kd, p.r_kq])
        self._mu_rs = fault.mu * p.r_s
        self._r_f = fault.r_f(p.r_s)
        self._active = fault.active
        if self._active:
            self._if_den = fault.mu * (1.0 - fault.mu) * p.L_ls

    def currents(self, y):
        return currents_fast(y, self.fault, self.model)

    def derivatives(self, t, y):
        """d/dt of [lam_q, lam_d, lam_0, lam_fd, lam_kd, lam_kq, lam_f, theta]."""
        p = self.params
        i6 = self.model.L_inv @ y[:6]
        dy = np.empty(8)
        rs = self._r_stator
        if self._active:
            theta = y[IDX_THETA]
            cs, sn = math.cos(theta), math.sin(theta)
            lam_a = cs * y[0] + sn * y[1] + y[2]
            i_f = (y[6] - self.fault.mu * lam_a) / self._if_den
            mu_if = self.fault.mu * i_f
            iq = i6[0] + mu_if * (2.0 / 3.0) * cs
            id_ = i6[1] + mu_if * (2.0 / 3.0) * sn
            i0 = i6[2] + mu_if / 3.0
            mu_rs_if = self._mu_rs * i_f
            dy[0] = rs * iq - self.w_e * y[1] - mu_rs_if * (2.0 / 3.0) * cs
            dy[1] = rs * id_ + self.w_e * y[0] - mu_rs_if * (2.0 / 3.0) * sn
            dy[2] = rs * i0 - mu_rs_if / 3.0
            i_a = cs * iq + sn * id_ + i0
            dy[6] = self._mu_rs * (i_a - i_f) - self._r_f * i_f
        else:
            dy[0] = rs * i6[0] - self.w_e * y[1]
            dy[1] = rs * i6[1] + self.w_e * y[0]
            dy[2] = rs * i6[2]
            dy[6] = 0.0
        dy[3] = self.V_fd - p.r_fd * i6[3]
        dy[4] = -p.r_kd * i6[4]
        dy[5] = -p.r_kq * i6[5]
        if self._has_noise:
            dy[:6] += self.noise_w
        dy[IDX_THETA] = self.w_e
        return dy

    def terminal(self, y):
        """Phase currents/voltages, fault current and powers at a state."""
        theta = y[IDX_THETA]
        i6, i_f = currents_fast(y, self.fault, self.model)
        cs0, sn0 = math.cos(theta), math.sin(theta)
        cs1, sn1 = math.cos(theta - _SHIFT), math.sin(theta - _SHIFT)
        cs2, sn2 = math.cos(theta + _SHIFT), math.sin(theta + _SHIFT)
        iq, id_, i0 = i6[0], i6[1], i6[2]
        i_abc = np.array([cs0 * iq + sn0 * id_ + i0,
                          cs1 * iq + sn1 * id_ + i0,
                          cs2 * iq + sn2 * id_ + i0])
        v_abc = self.R_load * i_abc
        if self.load.L_phase:
            dy = self.derivatives(0.0, y)
            di3 = (self.model.L_inv @ dy[:6])[:3]
            w = self.w_e
            vl = self.load.L_phase * (di3 + np.array([w * i6[1], -w * i6[0], 0.0]))
            tinv = inverse_park_matrix(theta)
            v_abc = v_abc + tinv @ vl
        p_total, p_loss = mech_power(v_abc, i_abc, i_f, self.fault, self.params)
        return i_abc, v_abc, i_f, i6, p_total, p_loss


def machine_derivatives(state: WrsgState, V_fd: float, w_r: float,
                        fault: FaultParams, load: LoadModel,
                        params: WrsgParams, t: float = 0.0,
                        noise_w=None) -> np.ndarray:
    """Flux-linkage derivatives for a frozen (speed, field, load) condition."""
    sys = ElectricalSystem(params, load, fault, w_r, V_fd,
                           load.resistance_at(t), noise_w=noise_w)
    return sys.derivatives(t, state.as_array())


def steady_state(params: WrsgParams, R_load: float, V_fd: float,
                 w_e: float, theta0: float = 0.0) -> WrsgState:
    """Healthy balanced steady state at constant speed and field voltage."""
    p = params
    i_fd = V_fd / p.r_fd
    lq = p.L_mq + p.L_ls
    ld = p.L_md + p.L_ls
    r = R_load + p.r_s
    # (R) i_q = w lam_d = w (-Ld i_d + Lmd i_fd); (R) i_d = w Lq i_q
    a = np.array([[r, w_e * ld], [-w_e * lq, r]])
    b = np.array([w_e * p.L_md * i_fd, 0.0])
    i_q, i_d = np.linalg.solve(a, b)
    lam_q = -lq * i_q
    lam_d = -ld * i_d + p.L_md * i_fd
    lam_fd = -p.L_md * i_d + (p.L_md + p.L_lf) * i_fd
    lam_kd = -p.L_md * i_d + p.L_md * i_fd
    lam_kq = -p.L_mq * i_q
    return WrsgState(lam_q=float(lam_q), lam_d=float(lam_d), lam_0=0.0,
                     lam_fd=float(lam_fd), lam_kd=float(lam_kd),
                     lam_kq=float(lam_kq), lam_f=0.0, theta_e=theta0)


def field_voltage_for_terminal(params: WrsgParams, R_load: float, w_e: float,
                               v_phase_rms: float) -> float:
    """Field voltage whose healthy steady state hits the target phase rms.

    The healthy steady map V_rms(V_fd) is linear through the origin.
    """
    probe = 10.0
    st = steady_state(params, R_load, probe, w_e)
    model = build_L(params)
    i6, _ = currents_fast(st.as_array(), HEALTHY_FAULT, model)
    v_amp = R_load * math.hypot(i6[0], i6[1])
    v_rms = v_amp / math.sqrt(2.0)
    return probe * v_phase_rms / v_rms


def seed_fault_flux(state: WrsgState, fault: FaultParams,
                    params: WrsgParams) -> WrsgState:
    """Continuity at fault switch-on: sub-winding flux takes its proportional
    share of the phase-a linkage so i_f starts at exactly zero."""
    lam_a = (math.cos(state.theta_e) * state.lam_q
             + math.sin(state.theta_e) * state.lam_d + state.lam_0)
    return WrsgState(state.lam_q, state.lam_d, state.lam_0, state.lam_fd,
                     state.lam_kd, state.lam_kq, fault.mu * lam_a, state.theta_e)
