"""Constant-velocity Kalman filter on [u, v, s, r, du, dv, ds] box states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels

S_MIN = 1.0  # px^2
STD_POS = 1.0 / 20.0  # of box height
STD_VEL = 1.0 / 160.0
STD_ASPECT = 0.1  # of r; r is a random walk, so it needs room to follow turns and edge clipping

H = np.zeros((4, 7))
H[[0, 1, 2, 3], [0, 1, 2, 3]] = 1.0


class SingularInnovation(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class KalmanState:
    """Box state plus the reference size (h, s, r) its noise levels scale with.

    The reference is refreshed on every update and left alone by predict,
    so multi-step prediction composes exactly.
    """

    mean: np.ndarray
    cov: np.ndarray
    ref: tuple[float, float, float]

    @property
    def box(self) -> tuple[float, float, float, float]:
        return state_to_box(self.mean)


def box_to_z(box) -> np.ndarray:
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    return np.array([x0 + w / 2.0, y0 + h / 2.0, w * h, w / h])


def state_to_box(x) -> tuple[float, float, float, float]:
    s = max(float(x[2]), S_MIN)
    r = max(float(x[3]), 1e-6)
    w = np.sqrt(s * r)
    h = s / w
    return (float(x[0] - w / 2), float(x[1] - h / 2), float(x[0] + w / 2), float(x[1] + h / 2))


def _ref_of(z) -> tuple[float, float, float]:
    s, r = max(float(z[2]), S_MIN), max(float(z[3]), 1e-6)
    return (float(np.sqrt(s / r)), s, r)


def transition(dt: int = 1) -> np.ndarray:
    F = np.eye(7)
    F[0, 4] = F[1, 5] = F[2, 6] = dt
    return F


def process_noise(ref, dt: int = 1) -> np.ndarray:
    """Q accumulated over ``dt`` unit steps: sum_k F^k Q1 F^k^T."""
    h, s, r = ref
    sp, sv = STD_POS * h, STD_VEL * h
    q1 = np.diag([sp**2, sp**2, (2 * STD_POS * s) ** 2, (STD_ASPECT * r) ** 2, sv**2, sv**2, (2 * STD_VEL * s) ** 2])
    if dt == 1:
        return q1
    F1 = transition(1)
    q = np.zeros((7, 7))
    Fk = np.eye(7)
    for _ in range(dt):
        q += Fk @ q1 @ Fk.T
        Fk = F1 @ Fk
    return q


def measurement_noise(ref) -> np.ndarray:
    h, s, r = ref
    sp = STD_POS * h
    return np.diag([sp**2, sp**2, (2 * STD_POS * s) ** 2, (STD_ASPECT * r) ** 2])


def initiate(box) -> KalmanState:
    z = box_to_z(box)
    ref = _ref_of(z)
    h, s, r = ref
    mean = np.r_[z, 0.0, 0.0, 0.0]
    std = np.array([2 * STD_POS * h, 2 * STD_POS * h, 4 * STD_POS * s, 2 * STD_ASPECT * r,
                    10 * STD_VEL * h, 10 * STD_VEL * h, 20 * STD_VEL * s])
    return KalmanState(mean, np.diag(std**2), ref)


def predict(state: KalmanState, dt: int = 1) -> KalmanState:
    if dt < 1:
        raise ValueError("dt must be >= 1 frame")
    mean, cov = kernels.kf_predict(state.mean, state.cov, transition(dt), process_noise(state.ref, dt))
    if mean[2] < S_MIN:
        mean[2] = S_MIN
    return KalmanState(mean, cov, state.ref)


def update(state: KalmanState, box, R: np.ndarray | None = None) -> KalmanState:
    z = box_to_z(box)
    if R is None:
        R = measurement_noise(state.ref)
    out = kernels.kf_update(state.mean, state.cov, z, H, R)
    if out is None:
        raise SingularInnovation("innovation covariance is not positive definite")
    mean, cov = out
    if mean[2] < S_MIN:
        mean[2] = S_MIN
    return KalmanState(mean, cov, _ref_of(z))
