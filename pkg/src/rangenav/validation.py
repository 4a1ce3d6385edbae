"""Dense-matrix oracles for the closed-form filter and selection code.

Each check builds random problems, solves them once with the structured
runtime code and once with plain 9x9 linear algebra, and reports the worst
disagreement. The `validate` command of the CLI runs :func:`run_all`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ekf import ID, IV, IX, STATE_DIM, FilterParams, StateEstimate, predict, range_update
from .selection import SelectionPolicy, score_anchor, select_anchor
from .sim import Anchor, ImuSample, NoiseParams, RangeMeasurement
from .so3 import rotvec_to_rotation, skew


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    trials: int

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst {self.worst:.3e} (tol {self.tolerance:.0e}, {self.trials} trials)"


def random_covariance(rng: np.random.Generator, dim: int = STATE_DIM) -> np.ndarray:
    """A well-conditioned random SPD matrix with correlated blocks."""
    A = rng.standard_normal((dim, dim))
    scale = np.exp(rng.uniform(-2.0, 1.0, dim))
    P = scale[:, None] * (A @ A.T / dim + 0.05 * np.eye(dim)) * scale[None, :]
    return 0.5 * (P + P.T)


def random_anchors(rng: np.random.Generator, n: int) -> list[Anchor]:
    return [Anchor(i + 1, rng.uniform(-4.0, 4.0, 3)) for i in range(n)]


def dense_update(cov: np.ndarray, x_hat: np.ndarray, anchor: Anchor, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Kalman gain and Joseph-form posterior with the full 1x9 Jacobian."""
    d = x_hat - anchor.p
    H = np.zeros((1, STATE_DIM))
    H[0, IX] = d / np.linalg.norm(d)
    S = H @ cov @ H.T + r
    K = cov @ H.T / S
    IKH = np.eye(STATE_DIM) - K @ H
    return K[:, 0], IKH @ cov @ IKH.T + r * (K @ K.T)


def dense_trace_change(cov, x_hat, anchor, r) -> float:
    d = x_hat - anchor.p
    H = np.zeros((1, STATE_DIM))
    H[0, IX] = d / np.linalg.norm(d)
    K = cov @ H.T / (H @ cov @ H.T + r)
    return float(np.trace((np.eye(STATE_DIM) - K @ H) @ cov) - np.trace(cov))


def dense_predict_covariance(R_hat, alpha_m, gamma, dt, noise: NoiseParams, cov) -> np.ndarray:
    """F P F' + Q assembled entry by entry from the continuous-time model."""
    A = np.zeros((STATE_DIM, STATE_DIM))
    A[IX, IV] = np.eye(3)
    A[IV, ID] = -R_hat @ skew(alpha_m)
    A[ID, ID] = -skew(gamma)
    F = np.eye(STATE_DIM) + A * dt
    Q = np.zeros((STATE_DIM, STATE_DIM))
    Q[IV, IV] = (noise.sigma_alpha * dt) ** 2 * R_hat @ R_hat.T
    Q[ID, ID] = (noise.sigma_gamma * dt) ** 2 * np.eye(3)
    return F @ cov @ F.T + Q


def check_score_formula(trials: int = 1000, seed: int = 0, rtol: float = 1e-9) -> CheckResult:
    """Closed-form trace change against the dense posterior trace."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        cov = random_covariance(rng)
        x_hat = rng.uniform(-3.0, 3.0, 3)
        anchor = random_anchors(rng, 1)[0]
        r = 10.0 ** rng.uniform(-4.0, 0.0)
        fast = score_anchor(cov, x_hat, anchor, r).trace_delta
        ref = dense_trace_change(cov, x_hat, anchor, r)
        worst = max(worst, abs(fast - ref) / abs(ref))
    return CheckResult("trace-change closed form", worst <= rtol, worst, rtol, trials)


def check_greedy_optimal(trials: int = 100, seed: int = 1, slack: float = 1e-12) -> CheckResult:
    """The greedy pick has the smallest dense posterior trace of all anchors.

    `worst` is the largest excess of the picked anchor's posterior trace over
    the best one, relative to the prior trace.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        cov = random_covariance(rng)
        x_hat = rng.uniform(-3.0, 3.0, 3)
        anchors = random_anchors(rng, int(rng.integers(2, 9)))
        r = 10.0 ** rng.uniform(-4.0, 0.0)
        pick = select_anchor(cov, x_hat, anchors, r, SelectionPolicy.greedy(), 0)
        traces = {a.id: dense_trace_change(cov, x_hat, a, r) for a in anchors}
        excess = (traces[pick] - min(traces.values())) / np.trace(cov)
        worst = max(worst, excess)
    return CheckResult("greedy pick minimises posterior trace", worst <= slack, worst, slack, trials)


def check_update_joseph(trials: int = 200, seed: int = 2, tol: float = 1e-9) -> CheckResult:
    """Runtime range update against the Joseph-form posterior and dense gain."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        cov = random_covariance(rng)
        state = StateEstimate(rng.uniform(-3.0, 3.0, 3), rng.standard_normal(3), np.eye(3))
        anchor = random_anchors(rng, 1)[0]
        r = 10.0 ** rng.uniform(-3.0, 0.0)
        pred = float(np.linalg.norm(state.x_hat - anchor.p))
        meas = RangeMeasurement(0.0, anchor.id, pred + rng.normal(0.0, 0.01))
        # no attitude correction, so the reset does not alter the covariance
        cov[ID, :] = 0.0
        cov[:, ID] = 0.0
        K, P_ref = dense_update(cov, state.x_hat, anchor, r)
        out, P = range_update(state, cov, meas, anchor, r)
        innov = meas.rho - pred
        err_cov = np.max(np.abs(P - P_ref)) / np.max(np.abs(cov))
        err_x = np.max(np.abs(out.x_hat - (state.x_hat + K[IX] * innov)))
        err_v = np.max(np.abs(out.v_hat - (state.v_hat + K[IV] * innov)))
        worst = max(worst, err_cov, err_x, err_v)
    return CheckResult("range update vs Joseph form", worst <= tol, worst, tol, trials)


def check_predict_dense(trials: int = 200, seed: int = 3, tol: float = 1e-12) -> CheckResult:
    """Covariance propagation against the dense F P F' + Q."""
    rng = np.random.default_rng(seed)
    params = FilterParams(NoiseParams())
    worst = 0.0
    dt = 0.002
    for _ in range(trials):
        cov = random_covariance(rng)
        R = rotvec_to_rotation(rng.standard_normal(3))
        state = StateEstimate(rng.standard_normal(3), rng.standard_normal(3), R)
        imu = ImuSample(0.0, rng.normal(0.0, 5.0, 3) + [0.0, 0.0, 9.81], rng.normal(0.0, 0.5, 3))
        _, P = predict(state, cov, imu, dt, params)
        ref = dense_predict_covariance(R, imu.alpha_m, imu.gamma, dt, params.noise, cov)
        worst = max(worst, np.max(np.abs(P - ref)) / np.max(np.abs(ref)))
    return CheckResult("prediction vs dense F P F' + Q", worst <= tol, worst, tol, trials)


def run_all() -> list[CheckResult]:
    return [check_score_formula(), check_greedy_optimal(), check_update_joseph(), check_predict_dense()]
