"""Amplitude-invariant Park transform, q-axis leading d-axis, rotor-angle
referenced.  One convention, used everywhere in the machine model and its
oracles: a balanced set aligned with the rotor maps to (amplitude, 0, 0).
"""
from __future__ import annotations

import math

import numpy as np

_TWO_THIRDS = 2.0 / 3.0
_SHIFT = 2.0 * math.pi / 3.0


def park_matrix(theta: float) -> np.ndarray:
    """3x3 abc -> qd0 matrix T(theta)."""
    c0, c1, c2 = (math.cos(theta), math.cos(theta - _SHIFT), math.cos(theta + _SHIFT))
    s0, s1, s2 = (math.sin(theta), math.sin(theta - _SHIFT), math.sin(theta + _SHIFT))
    return _TWO_THIRDS * np.array([
        [c0, c1, c2],
        [s0, s1, s2],
        [0.5, 0.5, 0.5],
    ])


def inverse_park_matrix(theta: float) -> np.ndarray:
    """3x3 qd0 -> abc matrix, exact inverse of park_matrix(theta)."""
    c0, c1, c2 = (math.cos(theta), math.cos(theta - _SHIFT), math.cos(theta + _SHIFT))
    s0, s1, s2 = (math.sin(theta), math.sin(theta - _SHIFT), math.sin(theta + _SHIFT))
    return np.array([
        [c0, s0, 1.0],
        [c1, s1, 1.0],
        [c2, s2, 1.0],
    ])


def park(abc, theta: float) -> np.ndarray:
    return park_matrix(theta) @ np.asarray(abc, dtype=float)


def inverse_park(qd0, theta: float) -> np.ndarray:
    return inverse_park_matrix(theta) @ np.asarray(qd0, dtype=float)


def park_column_a(theta: float) -> np.ndarray:
    """First column of T: the qd0 image of a unit phase-a quantity."""
    return np.array([_TWO_THIRDS * math.cos(theta),
                     _TWO_THIRDS * math.sin(theta),
                     1.0 / 3.0])


def phase_a_row(theta: float) -> np.ndarray:
    """First row of the inverse transform: phase-a value from qd0."""
    return np.array([math.cos(theta), math.sin(theta), 1.0])
