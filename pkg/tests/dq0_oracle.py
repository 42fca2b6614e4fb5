"""Independent classic dq0 synchronous generator used as the healthy-mode
reference: textbook per-axis flux-current inversion (d-axis 3x3, q-axis 2x2,
zero-sequence scalar), no fault machinery, generator sign convention.

State: [lam_q, lam_d, lam_0, lam_fd, lam_kd, lam_kq, theta_e].
"""
import numpy as np


class ClassicDq0Generator:
    def __init__(self, params, R_load):
        self.p = params
        self.R = R_load
        lmd, lmq = params.L_md, params.L_mq
        ld = lmd + params.L_ls
        lq = lmq + params.L_ls
        # d-axis: [lam_d, lam_fd, lam_kd] vs [i_d, i_fd, i_kd]
        md = np.array([
            [-ld, lmd, lmd],
            [-lmd, lmd + params.L_lf, lmd],
            [-lmd, lmd, lmd + params.L_lkd],
        ])
        # q-axis: [lam_q, lam_kq] vs [i_q, i_kq]
        mq = np.array([
            [-lq, lmq],
            [-lmq, lmq + params.L_lkq],
        ])
        self.md_inv = np.linalg.inv(md)
        self.mq_inv = np.linalg.inv(mq)
        self.l0 = params.zero_seq_inductance

    def currents(self, y):
        i_q, i_kq = self.mq_inv @ np.array([y[0], y[5]])
        i_d, i_fd, i_kd = self.md_inv @ np.array([y[1], y[3], y[4]])
        i_0 = -y[2] / self.l0
        return i_q, i_d, i_0, i_fd, i_kd, i_kq

    def make_derivatives(self, V_fd, w_e):
        p = self.p
        r_tot = self.R + p.r_s

        def deriv(t, y):
            i_q, i_d, i_0, i_fd, i_kd, i_kq = self.currents(y)
            return np.array([
                r_tot * i_q - w_e * y[1],
                r_tot * i_d + w_e * y[0],
                r_tot * i_0,
                V_fd - p.r_fd * i_fd,
                -p.r_kd * i_kd,
                -p.r_kq * i_kq,
                w_e,
            ])
        return deriv
