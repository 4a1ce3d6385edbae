"""Ground-truth trajectories and synthetic IMU / range measurements.

Trajectories are kinematic: a piecewise profile of hovers and point-to-point
moves, evaluated analytically at any time. Attitude is level with an optional
constant yaw rate, which is enough to excite every term of the filter while
keeping the truth exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .so3 import rot_z

GRAVITY = np.array([0.0, 0.0, -9.81])

SEGMENT_KINDS = ("hover", "move", "takeoff", "land", "cruise")


@dataclass
class TruthState:
    t: float
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    R: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True)
class Anchor:
    id: int
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError(f"anchor {self.id} has a non-finite position")
        object.__setattr__(self, "p", p)


@dataclass
class NoiseParams:
    """Per-sample noise standard deviations.

    sigma_alpha is in m/s^2 per accelerometer axis, sigma_gamma in rad/s per
    gyro axis and sigma_rho in m per range. The range variance handed to the
    filter is ``r = sigma_rho**2``.
    """

    sigma_alpha: float = 0.5
    sigma_gamma: float = 0.01
    sigma_rho: float = 0.1

    def __post_init__(self):
        for name in ("sigma_alpha", "sigma_gamma", "sigma_rho"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def r(self) -> float:
        return self.sigma_rho**2


@dataclass
class ImuSample:
    t: float
    alpha_m: np.ndarray
    gamma: np.ndarray


@dataclass
class RangeMeasurement:
    t: float
    anchor_id: int
    rho: float


@dataclass
class Segment:
    kind: str
    duration: float
    to: np.ndarray | None = None


def _min_jerk(tau: float) -> tuple[float, float, float]:
    # normalised position, velocity and acceleration of a rest-to-rest quintic
    s = tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)
    ds = 30.0 * tau**2 * (1.0 - tau) ** 2
    dds = 60.0 * tau - 180.0 * tau**2 + 120.0 * tau**3
    return s, ds, dds


@dataclass
class TrajectoryProfile:
    """A chain of segments starting from `start`.

    Segment kinds:

    * ``hover`` holds the current point.
    * ``move`` / ``takeoff`` / ``land`` go to ``to`` along a straight line with a
      minimum-jerk velocity ramp (rest to rest). ``land`` defaults to the point
      on the ground below the current position.
    * ``cruise`` goes to ``to`` at constant velocity. It must be chained with
      other segments of equal velocity, so it cannot follow a rest segment.
    """

    start: np.ndarray = field(default_factory=lambda: np.zeros(3))
    segments: list[Segment] = field(default_factory=list)
    yaw0: float = 0.0
    yaw_rate: float = 0.0

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float).reshape(3)
        self._build()

    def _build(self):
        self._t0 = []
        self._p0 = []
        self._p1 = []
        t, p = 0.0, self.start.copy()
        v_prev = np.zeros(3)
        for i, seg in enumerate(self.segments):
            if seg.kind not in SEGMENT_KINDS:
                raise ValueError(f"segment {i}: unknown kind {seg.kind!r}")
            if not seg.duration > 0.0:
                raise ValueError(f"segment {i}: duration must be positive")
            if seg.kind == "hover":
                target = p.copy()
            elif seg.to is not None:
                target = np.asarray(seg.to, dtype=float).reshape(3)
            elif seg.kind == "land":
                target = np.array([p[0], p[1], 0.0])
            else:
                raise ValueError(f"segment {i}: {seg.kind!r} needs a target")
            if seg.kind == "cruise":
                v_in = v_out = (target - p) / seg.duration
            else:
                v_in = v_out = np.zeros(3)
            if not np.allclose(v_in, v_prev, rtol=0.0, atol=1e-9):
                raise ValueError(
                    f"segment {i} ({seg.kind}) starts with velocity {v_in} "
                    f"but the profile arrives with {v_prev}: velocity is discontinuous"
                )
            self._t0.append(t)
            self._p0.append(p)
            self._p1.append(target)
            t += seg.duration
            p = target
            v_prev = v_out
        if not np.allclose(v_prev, 0.0, rtol=0.0, atol=1e-9):
            raise ValueError("profile must end at rest (velocity is discontinuous into the final hold)")
        self._end = p

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def evaluate(self, t: float) -> TruthState:
        x, v, a = self._end.copy(), np.zeros(3), np.zeros(3)
        if not self.segments:
            x = self.start.copy()
        for seg, t0, p0, p1 in zip(self.segments, self._t0, self._p0, self._p1):
            # the profile ends at rest, so t past the last segment is the final hold
            if t < t0 + seg.duration:
                tau = min(max((t - t0) / seg.duration, 0.0), 1.0)
                d = p1 - p0
                if seg.kind == "cruise":
                    x, v, a = p0 + tau * d, d / seg.duration, np.zeros(3)
                else:
                    s, ds, dds = _min_jerk(tau)
                    x = p0 + s * d
                    v = ds / seg.duration * d
                    a = dds / seg.duration**2 * d
                break
        yaw = self.yaw0 + self.yaw_rate * t
        return TruthState(
            t=float(t), x=x, v=v, a=a, R=rot_z(yaw), omega=np.array([0.0, 0.0, self.yaw_rate])
        )

    def sample(self, ts) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised `evaluate`: positions, velocities, accelerations and yaw angles at `ts`."""
        ts = np.asarray(ts, dtype=float)
        m = len(ts)
        x = np.tile(self._end if self.segments else self.start, (m, 1))
        v, a = np.zeros((m, 3)), np.zeros((m, 3))
        for i, (seg, t0, p0, p1) in enumerate(zip(self.segments, self._t0, self._p0, self._p1)):
            lo = -np.inf if i == 0 else t0
            idx = np.nonzero((ts >= lo) & (ts < t0 + seg.duration))[0]
            if idx.size == 0:
                continue
            tau = np.clip((ts[idx] - t0) / seg.duration, 0.0, 1.0)[:, None]
            d = p1 - p0
            if seg.kind == "cruise":
                x[idx] = p0 + tau * d
                v[idx] = d / seg.duration
                a[idx] = 0.0
            else:
                s, ds, dds = _min_jerk(tau)
                x[idx] = p0 + s * d
                v[idx] = ds / seg.duration * d
                a[idx] = dds / seg.duration**2 * d
        return x, v, a, self.yaw0 + self.yaw_rate * ts

    def truth_at(self, t: float, x, v, a, yaw) -> TruthState:
        """Wrap one row of `sample` output as a `TruthState`."""
        return TruthState(float(t), x, v, a, rot_z(yaw), np.array([0.0, 0.0, self.yaw_rate]))

    @classmethod
    def paper_default(
        cls,
        height: float = 2.0,
        takeoff_s: float = 1.0,
        hover_s: float = 2.0,
        sweep_s: float = 8.0,
        land_s: float = 1.0,
        sweep_amplitude: float = 1.5,
        yaw0: float = 0.0,
        yaw_rate: float = 0.0,
    ) -> "TrajectoryProfile":
        """Take off vertically, hover, sweep side to side along y in the x = 0 plane, land at the origin."""
        h, A = height, sweep_amplitude
        segments = [
            Segment("takeoff", takeoff_s, np.array([0.0, 0.0, h])),
            Segment("hover", hover_s),
            Segment("move", sweep_s / 4, np.array([0.0, A, h])),
            Segment("move", sweep_s / 2, np.array([0.0, -A, h])),
            Segment("move", sweep_s / 4, np.array([0.0, 0.0, h])),
            Segment("land", land_s, np.zeros(3)),
        ]
        return cls(np.zeros(3), segments, yaw0=yaw0, yaw_rate=yaw_rate)

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryProfile":
        """Build a profile from its scenario-file section.

        Either ``{"type": "paper", ...keyword overrides}`` or
        ``{"start": [x, y, z], "segments": [{"kind", "duration", "to"}], "yaw0", "yaw_rate"}``.
        """
        d = dict(d)
        if d.pop("type", "segments") == "paper":
            return cls.paper_default(**d)
        segments = [
            Segment(s["kind"], float(s["duration"]), None if s.get("to") is None else np.asarray(s["to"], float))
            for s in d.get("segments", [])
        ]
        return cls(
            np.asarray(d.get("start", [0.0, 0.0, 0.0]), dtype=float),
            segments,
            yaw0=float(d.get("yaw0", 0.0)),
            yaw_rate=float(d.get("yaw_rate", 0.0)),
        )


def generate_trajectory(profile: TrajectoryProfile, dt: float, duration: float | None = None) -> list[TruthState]:
    """Sample `profile` every `dt` seconds from t = 0 to `duration` inclusive."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    T = profile.duration if duration is None else duration
    n = int(np.floor(T / dt + 1e-9))
    return [profile.evaluate(k * dt) for k in range(n + 1)]


def synth_imu(truth: TruthState, noise: NoiseParams, rng: np.random.Generator, g=GRAVITY) -> ImuSample:
    """Gyro and accelerometer output for one truth sample.

    The accelerometer reports proper acceleration in the body frame. Noise is
    drawn even when its standard deviation is zero so that random streams stay
    aligned across configurations.
    """
    gamma = truth.omega + noise.sigma_gamma * rng.standard_normal(3)
    alpha_m = truth.R.T @ (truth.a - g) + noise.sigma_alpha * rng.standard_normal(3)
    return ImuSample(truth.t, alpha_m, gamma)


def synth_range(truth: TruthState, anchor: Anchor, noise: NoiseParams, rng: np.random.Generator) -> RangeMeasurement:
    rho = float(np.linalg.norm(truth.x - anchor.p)) + noise.sigma_rho * float(rng.standard_normal())
    return RangeMeasurement(truth.t, anchor.id, max(rho, 0.0))


STREAM_COLUMNS = (
    "t", "kind",
    "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az",
    "alpha_x", "alpha_y", "alpha_z", "gamma_x", "gamma_y", "gamma_z",
    "anchor_id", "rho",
)


def write_streams_csv(
    path,
    truth: Iterable[TruthState] = (),
    imu: Iterable[ImuSample] = (),
    ranges: Iterable[RangeMeasurement] = (),
) -> None:
    """Dump truth and measurement streams, one row per sample, sorted by time.

    Columns follow `STREAM_COLUMNS`; fields that do not apply to a row's kind
    are left empty. Floats are written with ``repr`` so they round-trip.
    """
    rows = []
    blank = [""] * (len(STREAM_COLUMNS) - 2)
    for s in truth:
        row = list(blank)
        row[0:9] = [repr(float(u)) for u in (*s.x, *s.v, *s.a)]
        rows.append((s.t, 0, "truth", row))
    for m in imu:
        row = list(blank)
        row[9:15] = [repr(float(u)) for u in (*m.alpha_m, *m.gamma)]
        rows.append((m.t, 1, "imu", row))
    for m in ranges:
        row = list(blank)
        row[15:17] = [str(m.anchor_id), repr(float(m.rho))]
        rows.append((m.t, 2, "range", row))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(STREAM_COLUMNS)
        for t, _, kind, row in rows:
            w.writerow([repr(float(t)), kind, *row])


def anchors_from_rows(rows: Sequence[Sequence[float]]) -> list[Anchor]:
    """Anchors from ``[id, x, y, z]`` rows, checking that ids are unique."""
    anchors = [Anchor(int(r[0]), np.asarray(r[1:4], dtype=float)) for r in rows]
    ids = [a.id for a in anchors]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate anchor ids in {ids}")
    return anchors
