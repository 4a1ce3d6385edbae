"""Nine-state error-state EKF driven by an IMU and single range measurements.

The stochastic state is ``(x, v, delta)``: position and velocity in the world
frame and a small body-frame attitude error. The attitude itself is carried by
a reference rotation ``R_ref``; the estimate is ``R_ref (I + skew(delta))`` and
``delta`` is folded into ``R_ref`` after every measurement update, so it is
zero whenever control returns to the caller.

Covariances are plain ``(9, 9)`` arrays ordered ``(x, v, delta)``; use the
``IX``, ``IV``, ``ID`` slices or :func:`cov_block` to get at the 3x3 blocks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .sim import GRAVITY, Anchor, ImuSample, NoiseParams, RangeMeasurement
from .so3 import orthonormalize, rotvec_to_rotation, skew

STATE_DIM = 9
IX, IV, ID = slice(0, 3), slice(3, 6), slice(6, 9)
_BLOCKS = {"x": IX, "v": IV, "d": ID, "delta": ID}

# an anchor closer than this to the position estimate has no usable direction
EPS_DIST = 1e-6
# attitude errors above this are outside the small-angle regime of the reset
RESET_WARN_RAD = 0.5

_I3 = np.eye(3)


class FilterError(ValueError):
    """Invalid input to a filter step."""


class MeasurementRejected(FilterError):
    """A range measurement was not applied; the state is left untouched."""


class DegenerateGeometryError(MeasurementRejected):
    """The position estimate coincides with the anchor."""


class CovarianceError(FilterError):
    """The covariance lost symmetry or positive semidefiniteness."""


@dataclass
class StateEstimate:
    x_hat: np.ndarray
    v_hat: np.ndarray
    R_ref: np.ndarray
    delta_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "StateEstimate":
        return StateEstimate(self.x_hat.copy(), self.v_hat.copy(), self.R_ref.copy(), self.delta_hat.copy())


@dataclass
class FilterParams:
    """Noise model and initial uncertainty of the filter.

    The initial covariance is diagonal. Attitude uncertainty is split into
    roll/pitch (body x, y) and yaw (body z), since the yaw error is the one
    the sensors cannot see until the vehicle accelerates sideways.
    """

    noise: NoiseParams = field(default_factory=NoiseParams)
    sigma_pos0: float = 0.5
    sigma_vel0: float = 0.1
    sigma_rollpitch0: float = 0.1
    sigma_yaw0: float = 1.0
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    # innovation gate in standard deviations; None disables gating
    gate: float | None = None
    # apply the first-order rotation to the attitude covariance when resetting
    rotate_covariance_on_reset: bool = True

    def __post_init__(self):
        for name in ("sigma_pos0", "sigma_vel0", "sigma_rollpitch0", "sigma_yaw0"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be >= 0")
        self.gravity = np.asarray(self.gravity, dtype=float).reshape(3)

    @property
    def r(self) -> float:
        return self.noise.r

    def initial_covariance(self) -> np.ndarray:
        rp, yaw = self.sigma_rollpitch0**2, self.sigma_yaw0**2
        return np.diag(
            [self.sigma_pos0**2] * 3 + [self.sigma_vel0**2] * 3 + [rp, rp, yaw]
        )


def cov_block(P: np.ndarray, row: str, col: str) -> np.ndarray:
    """3x3 block of `P`, e.g. ``cov_block(P, "x", "d")`` for position/attitude."""
    return P[_BLOCKS[row], _BLOCKS[col]]


def composed_attitude(state: StateEstimate) -> np.ndarray:
    """Attitude estimate ``R_ref (I + skew(delta_hat))``, projected back onto SO(3)."""
    if not np.any(state.delta_hat):
        return state.R_ref
    return orthonormalize(state.R_ref @ (np.eye(3) + skew(state.delta_hat)))


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def process_jacobian(R_hat: np.ndarray, alpha_m: np.ndarray, gamma: np.ndarray, dt: float) -> np.ndarray:
    """First-order discrete transition matrix of the error dynamics."""
    F = np.eye(STATE_DIM)
    F[IX, IV] = dt * _I3
    F[IV, ID] = -dt * R_hat @ skew(alpha_m)
    F[ID, ID] = _I3 - dt * skew(gamma)
    return F


def process_noise(R_hat: np.ndarray, noise: NoiseParams, dt: float) -> np.ndarray:
    # sample noise of std sigma held over one step moves v by R nu_alpha dt and delta by nu_gamma dt
    Q = np.zeros((STATE_DIM, STATE_DIM))
    G = dt * R_hat
    Q[IV, IV] = noise.sigma_alpha**2 * (G @ G.T)
    Q[ID, ID] = (noise.sigma_gamma * dt) ** 2 * _I3
    return Q


def predict(
    state: StateEstimate, cov: np.ndarray, imu: ImuSample, dt: float, params: FilterParams
) -> tuple[StateEstimate, np.ndarray]:
    """Propagate mean and covariance over one IMU interval of length `dt`.

    The specific force is rotated with the attitude at the middle of the
    interval, which removes the first-order error a constant body rate would
    otherwise introduce. With zero angular rate this is exactly
    ``x += v dt + (R a + g) dt^2 / 2``.
    """
    if not (np.isfinite(dt) and dt > 0.0):
        raise FilterError(f"dt must be positive and finite, got {dt}")
    alpha_m = np.asarray(imu.alpha_m, dtype=float)
    gamma = np.asarray(imu.gamma, dtype=float)
    if not math.isfinite(alpha_m @ alpha_m + gamma @ gamma):
        raise FilterError(f"non-finite IMU sample at t={imu.t}")

    R_hat = composed_attitude(state)
    half = rotvec_to_rotation(0.5 * dt * gamma)
    R_mid = R_hat @ half
    acc = R_mid @ alpha_m + params.gravity
    out = StateEstimate(
        x_hat=state.x_hat + state.v_hat * dt + 0.5 * acc * dt**2,
        v_hat=state.v_hat + acc * dt,
        R_ref=R_mid @ half,
    )
    F = process_jacobian(R_hat, alpha_m, gamma, dt)
    P = F @ cov @ F.T + process_noise(R_hat, params.noise, dt)
    return out, _symmetrize(P)


def range_update(
    state: StateEstimate,
    cov: np.ndarray,
    meas: RangeMeasurement,
    anchor: Anchor,
    r: float,
    gate: float | None = None,
    rotate_covariance: bool = True,
) -> tuple[StateEstimate, np.ndarray]:
    """Scalar EKF update with one range, followed by the attitude reset.

    The measurement Jacobian is the unit vector from the anchor to the
    position estimate in the position slots and zero elsewhere, so only the
    first three columns of `cov` enter the gain.

    Raises
    ------
    DegenerateGeometryError
        If the position estimate is within `EPS_DIST` of the anchor.
    MeasurementRejected
        If the normalised innovation exceeds `gate`.
    FilterError
        If the innovation variance is not positive.
    """
    if r < 0.0:
        raise FilterError("range variance must be >= 0")
    d = state.x_hat - anchor.p
    rho_hat = float(np.linalg.norm(d))
    if rho_hat <= EPS_DIST:
        raise DegenerateGeometryError(f"position estimate coincides with anchor {anchor.id}")
    e = d / rho_hat
    PHt = cov[:, IX] @ e
    s = float(e @ PHt[IX]) + r
    if not s > 0.0:
        raise FilterError(f"innovation variance is {s} for anchor {anchor.id}")
    innov = meas.rho - rho_hat
    if gate is not None and innov**2 > gate**2 * s:
        raise MeasurementRejected(
            f"range to anchor {anchor.id} rejected: innovation {innov:.3f} m, gate {gate} sigma"
        )
    K = PHt / s
    dxi = K * innov
    updated = StateEstimate(
        x_hat=state.x_hat + dxi[IX],
        v_hat=state.v_hat + dxi[IV],
        R_ref=state.R_ref,
        delta_hat=state.delta_hat + dxi[ID],
    )
    P = _symmetrize(cov - np.outer(K, PHt))
    return reset_attitude(updated, P, rotate_covariance=rotate_covariance)


def reset_attitude(
    state: StateEstimate, cov: np.ndarray, rotate_covariance: bool = True
) -> tuple[StateEstimate, np.ndarray]:
    """Fold the attitude error into the reference rotation and zero it.

    The attitude rows and columns of the covariance are re-expressed about
    the new reference with the first-order reset Jacobian
    ``exp(-skew(delta_hat) / 2)``. Passing ``rotate_covariance=False`` keeps
    the covariance unchanged instead. That variant holds a large yaw
    variance fixed along the measured specific force, which the rotation
    can tilt away from when the attitude spread is large.
    """
    delta = state.delta_hat
    if not np.any(delta):
        return state.copy(), cov.copy()
    if np.linalg.norm(delta) > RESET_WARN_RAD:
        warnings.warn(
            f"attitude correction of {np.linalg.norm(delta):.2f} rad is outside the small-angle regime",
            RuntimeWarning,
            stacklevel=2,
        )
    P = cov.copy()
    if rotate_covariance:
        G = rotvec_to_rotation(-0.5 * delta)
        P[ID, :] = G @ P[ID, :]
        P[:, ID] = P[:, ID] @ G.T
    out = StateEstimate(
        x_hat=state.x_hat.copy(),
        v_hat=state.v_hat.copy(),
        R_ref=orthonormalize(state.R_ref @ rotvec_to_rotation(delta)),
    )
    return out, _symmetrize(P)


def check_covariance(P: np.ndarray, tol: float = 1e-9) -> None:
    """Raise `CovarianceError` unless `P` is finite, symmetric and PSD to `tol`.

    Symmetry is relative to the largest entry, the eigenvalue floor relative
    to the trace.
    """
    bad = first_covariance_violation(np.asarray(P)[None], tol)
    if bad is not None:
        raise CovarianceError(bad[1])


def covariance_health(Ps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Relative asymmetry and smallest eigenvalue over trace, per covariance in the stack `Ps`.

    Asymmetry is the largest ``|P - P'|`` entry divided by the largest
    ``|P|`` entry. A healthy covariance has both numbers near zero and the
    eigenvalue ratio no smaller than minus the tolerance.
    """
    Ps = np.asarray(Ps, dtype=float)
    if Ps.ndim != 3 or Ps.shape[1:] != (STATE_DIM, STATE_DIM):
        raise CovarianceError(f"expected a stack of 9x9 covariances, got {Ps.shape}")
    scale = np.max(np.abs(Ps), axis=(1, 2))
    asym = np.max(np.abs(Ps - np.swapaxes(Ps, 1, 2)), axis=(1, 2))
    tr = np.trace(Ps, axis1=1, axis2=2)
    lam = np.linalg.eigvalsh(Ps)[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_asym = np.where(scale > 0.0, asym / scale, 0.0)
        eig_ratio = np.where(tr > 0.0, lam / tr, np.where(lam < 0.0, -np.inf, 0.0))
    return rel_asym, eig_ratio


def first_covariance_violation(Ps: np.ndarray, tol: float = 1e-9) -> tuple[int, str] | None:
    """Index and reason of the first covariance in the stack `Ps` that is not symmetric PSD."""
    Ps = np.asarray(Ps, dtype=float)
    if Ps.ndim != 3 or Ps.shape[1:] != (STATE_DIM, STATE_DIM):
        raise CovarianceError(f"expected a stack of 9x9 covariances, got {Ps.shape}")
    finite = np.all(np.isfinite(Ps), axis=(1, 2))
    if not finite.all():
        k = int(np.argmin(finite))
        return k, "covariance has non-finite entries"
    rel_asym, eig_ratio = covariance_health(Ps)
    bad_sym = rel_asym > tol
    bad_psd = eig_ratio < -tol
    bad = bad_sym | bad_psd
    if not bad.any():
        return None
    k = int(np.argmax(bad))
    if bad_sym[k]:
        return k, f"covariance is not symmetric (relative asymmetry {rel_asym[k]:.3e})"
    return k, f"covariance has eigenvalue {eig_ratio[k]:.3e} times its trace"


class RangeEKF:
    """Stateful wrapper owning one estimate and its covariance."""

    def __init__(self, state: StateEstimate, params: FilterParams, cov: np.ndarray | None = None):
        self.state = state
        self.params = params
        self.cov = params.initial_covariance() if cov is None else np.array(cov, dtype=float)

    def predict(self, imu: ImuSample, dt: float) -> None:
        self.state, self.cov = predict(self.state, self.cov, imu, dt, self.params)

    def update(self, meas: RangeMeasurement, anchor: Anchor) -> None:
        self.state, self.cov = range_update(
            self.state,
            self.cov,
            meas,
            anchor,
            self.params.r,
            gate=self.params.gate,
            rotate_covariance=self.params.rotate_covariance_on_reset,
        )

    def snapshot(self) -> dict:
        """Copy of the current estimate for logging."""
        return {
            "x_hat": self.state.x_hat.copy(),
            "v_hat": self.state.v_hat.copy(),
            "R_hat": composed_attitude(self.state).copy(),
            "cov": self.cov.copy(),
        }
