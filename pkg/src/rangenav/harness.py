"""Scenario files, the simulation loop, metrics and Monte Carlo comparison."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .ekf import (
    ID,
    IX,
    FilterError,
    FilterParams,
    MeasurementRejected,
    StateEstimate,
    composed_attitude,
    covariance_health,
    first_covariance_violation,
    predict,
    range_update,
)
from .selection import NoValidAnchorError, SelectionPolicy, select_anchor
from .sim import (
    Anchor,
    ImuSample,
    NoiseParams,
    RangeMeasurement,
    TrajectoryProfile,
    TruthState,
    anchors_from_rows,
    synth_imu,
    synth_range,
)
from .so3 import euler_zyx_deg, rot_z


class ScenarioError(ValueError):
    """The scenario file is missing, malformed or inconsistent."""


class RunError(RuntimeError):
    """A filter error raised during a run, tagged with the simulation time."""


@dataclass
class Scenario:
    anchors: list[Anchor]
    trajectory: TrajectoryProfile = field(default_factory=TrajectoryProfile.paper_default)
    noise: NoiseParams = field(default_factory=NoiseParams)
    imu_hz: float = 500.0
    range_hz: float = 60.0
    filter: FilterParams | None = None
    policy: SelectionPolicy = field(default_factory=SelectionPolicy.greedy)
    seed: int = 0
    duration: float | None = None
    # draw the initial position estimate from the initial covariance; False starts at the truth
    perturb_init: bool = True
    check_covariance: bool = True

    def __post_init__(self):
        if not self.anchors:
            raise ScenarioError("scenario needs at least one anchor")
        if not (self.imu_hz >= self.range_hz > 0.0):
            raise ScenarioError("rates must satisfy imu_hz >= range_hz > 0")
        if self.filter is None:
            self.filter = FilterParams(noise=self.noise)
        try:
            self.policy.check(self.anchors)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
        if self.duration is None:
            self.duration = self.trajectory.duration

    def anchor(self, anchor_id: int) -> Anchor:
        for a in self.anchors:
            if a.id == anchor_id:
                return a
        raise KeyError(anchor_id)

    def with_policy(self, policy: SelectionPolicy) -> "Scenario":
        return replace(self, policy=policy)

    def sequential_policy(self) -> SelectionPolicy:
        if self.policy.kind == "sequential":
            return self.policy
        return SelectionPolicy.sequential(sorted(a.id for a in self.anchors))

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            anchors = anchors_from_rows(d["anchors"])
            trajectory = TrajectoryProfile.from_dict(d.get("trajectory", {"type": "paper"}))
            noise = NoiseParams(**d.get("noise", {}))
            rates = d.get("rates", {})
            fsec = dict(d.get("filter", {}))
            perturb = bool(fsec.pop("perturb_init", True))
            fnoise = NoiseParams(**fsec.pop("noise")) if "noise" in fsec else noise
            filt = FilterParams(noise=fnoise, **fsec)
            pol = d.get("policy", "greedy")
            if isinstance(pol, str):
                pol = {"type": pol}
            if pol["type"] == "sequential":
                policy = SelectionPolicy.sequential(pol.get("order") or sorted(a.id for a in anchors))
            else:
                policy = SelectionPolicy(pol["type"])
            return cls(
                anchors=anchors,
                trajectory=trajectory,
                noise=noise,
                imu_hz=float(rates.get("imu_hz", 500.0)),
                range_hz=float(rates.get("range_hz", 60.0)),
                filter=filt,
                policy=policy,
                seed=int(d.get("seed", 0)),
                duration=None if d.get("duration_s") is None else float(d["duration_s"]),
                perturb_init=perturb,
            )
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ScenarioError(f"invalid scenario: {exc!r}") from exc


def load_scenario(path) -> Scenario:
    """Read a scenario from a JSON file.

    ``paper.json`` resolves to the bundled default scenario when no such file
    exists at the given path.
    """
    p = Path(path)
    if not p.exists():
        bundled = resources.files("rangenav") / "data" / p.name
        if p.parent == Path(".") and bundled.is_file():
            return Scenario.from_dict(json.loads(bundled.read_text()))
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        d = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return Scenario.from_dict(d)


def paper_scenario(**overrides) -> Scenario:
    """The bundled scenario mirroring the flight experiment, with optional field overrides."""
    d = json.loads((resources.files("rangenav") / "data" / "paper.json").read_text())
    return replace(Scenario.from_dict(d), **overrides)


@dataclass
class RunMetrics:
    rmse_position: float
    rmse_velocity: float
    rmse_attitude: float
    rmse_position_axes: np.ndarray
    mean_cov_trace: float
    anchor_counts: dict[int, int]
    skipped_updates: int = 0
    # worst relative asymmetry and smallest eigenvalue / trace over the run
    cov_asymmetry: float = 0.0
    cov_min_eig_ratio: float = 0.0


LOG_COLUMNS = (
    "t",
    "x", "y", "z", "vx", "vy", "vz", "yaw", "pitch", "roll",
    "x_hat", "y_hat", "z_hat", "vx_hat", "vy_hat", "vz_hat", "yaw_hat", "pitch_hat", "roll_hat",
    "att_err_deg",
    "sd_x", "sd_y", "sd_z", "sd_vx", "sd_vy", "sd_vz", "sd_dx", "sd_dy", "sd_dz",
    "anchor_id", "rho",
)


@dataclass
class RunLog:
    """Per-tick time series of one run.

    Angles are in degrees, ``sd_*`` are square roots of the covariance
    diagonal. `anchor_id` is -1 and `rho` NaN on ticks without a range.
    """

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    euler: np.ndarray
    x_hat: np.ndarray
    v_hat: np.ndarray
    euler_hat: np.ndarray
    att_err_deg: np.ndarray
    sd: np.ndarray
    anchor_id: np.ndarray
    rho: np.ndarray
    # variance of the attitude error about the gravity axis [rad^2]
    gravity_axis_var: np.ndarray
    # position error squared, weighted by the inverse position covariance
    nees_position: np.ndarray
    cov_trace: np.ndarray
    imu: list[ImuSample] = field(default_factory=list, repr=False)
    ranges: list[RangeMeasurement] = field(default_factory=list, repr=False)
    truth: list[TruthState] = field(default_factory=list, repr=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(LOG_COLUMNS)
            for k in range(len(self.t)):
                vals = [
                    self.t[k], *self.x[k], *self.v[k], *self.euler[k],
                    *self.x_hat[k], *self.v_hat[k], *self.euler_hat[k],
                    self.att_err_deg[k], *self.sd[k],
                ]
                row = [repr(float(u)) for u in vals]
                aid = int(self.anchor_id[k])
                row += ["", ""] if aid < 0 else [str(aid), repr(float(self.rho[k]))]
                w.writerow(row)


def _range_ticks(n: int, imu_hz: float, range_hz: float) -> set[int]:
    # nearest IMU tick to each nominal ranging time, skipping t = 0
    ticks, j = set(), 1
    while True:
        k = int(round(j * imu_hz / range_hz))
        if k > n:
            return ticks
        ticks.add(k)
        j += 1


def run_scenario(scenario: Scenario, record_streams: bool = False) -> tuple[RunMetrics, RunLog]:
    """Simulate one flight and run the filter over it.

    Three independent random streams are spawned from the seed (IMU noise,
    range noise, initial estimate). Each IMU tick and each ranging tick draws
    the same numbers whatever the policy picks, so runs that differ only in
    policy see identical noise. The IMU sample driving the step from t to
    t + dt is synthesised at the middle of the interval.

    Raises
    ------
    RunError
        On a filter input error or a covariance that stops being symmetric PSD.
    """
    sc = scenario
    fp = sc.filter
    dt = 1.0 / sc.imu_hz
    n = int(math.floor(sc.duration * sc.imu_hz + 1e-9))
    range_ticks = _range_ticks(n, sc.imu_hz, sc.range_hz)
    imu_rng, range_rng, init_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(sc.seed).spawn(3)
    )
    anchors = {a.id: a for a in sc.anchors}
    prof = sc.trajectory
    # truth on a half-step grid: even rows are filter ticks, odd rows IMU sample instants
    th = np.arange(2 * n + 1) * (0.5 * dt)
    tx, tv, ta, tyaw = prof.sample(th)

    truth = prof.truth_at(0.0, tx[0], tv[0], ta[0], tyaw[0])
    if sc.perturb_init:
        state = StateEstimate(
            truth.x + fp.sigma_pos0 * init_rng.standard_normal(3), np.zeros(3), np.eye(3)
        )
    else:
        state = StateEstimate(truth.x.copy(), truth.v.copy(), truth.R.copy())
    P = fp.initial_covariance()

    m = n + 1
    x_hat, v_hat = np.empty((m, 3)), np.empty((m, 3))
    R_hat, Ps = np.empty((m, 3, 3)), np.empty((m, 9, 9))
    anchor_id, rho = np.full(m, -1, dtype=int), np.full(m, np.nan)
    counts = {a.id: 0 for a in sc.anchors}
    imus, ranges, truths = [], [], [truth]
    skipped = 0
    step = 0

    def store(k):
        x_hat[k], v_hat[k], R_hat[k], Ps[k] = state.x_hat, state.v_hat, composed_attitude(state), P

    store(0)
    for k in range(1, n + 1):
        t = k * dt
        j = 2 * k - 1
        try:
            imu = synth_imu(prof.truth_at(th[j], tx[j], tv[j], ta[j], tyaw[j]), sc.noise, imu_rng, fp.gravity)
            state, P = predict(state, P, imu, dt, fp)
            if record_streams:
                imus.append(imu)
            if k in range_ticks:
                truth = prof.truth_at(t, tx[j + 1], tv[j + 1], ta[j + 1], tyaw[j + 1])
                try:
                    aid = select_anchor(P, state.x_hat, sc.anchors, fp.r, sc.policy, step)
                except NoValidAnchorError:
                    range_rng.standard_normal()
                    skipped += 1
                else:
                    meas = synth_range(truth, anchors[aid], sc.noise, range_rng)
                    try:
                        state, P = range_update(
                            state, P, meas, anchors[aid], fp.r,
                            gate=fp.gate, rotate_covariance=fp.rotate_covariance_on_reset,
                        )
                    except MeasurementRejected:
                        skipped += 1
                    else:
                        counts[aid] += 1
                    anchor_id[k], rho[k] = aid, meas.rho
                    if record_streams:
                        ranges.append(meas)
                step += 1
        except FilterError as exc:
            raise RunError(f"t={t:.4f}s: {exc}") from exc
        store(k)

    if sc.check_covariance:
        bad = first_covariance_violation(Ps)
        if bad is not None:
            raise RunError(f"t={bad[0] * dt:.4f}s: {bad[1]}")
    rel_asym, eig_ratio = covariance_health(Ps)

    if record_streams:
        truths = [prof.truth_at(th[2 * k], tx[2 * k], tv[2 * k], ta[2 * k], tyaw[2 * k]) for k in range(m)]
    x, v, yaw = tx[::2], tv[::2], tyaw[::2]
    R_true = rot_z(yaw)
    # geodesic angle between truth and estimate, vectorised
    c = 0.5 * (np.einsum("kij,kij->k", R_true, R_hat) - 1.0)
    att_err = np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))
    ex = x_hat - x
    u = R_hat[:, 2, :]
    log = RunLog(
        t=np.arange(m) * dt,
        x=x, v=v, euler=euler_zyx_deg(R_true),
        x_hat=x_hat, v_hat=v_hat, euler_hat=euler_zyx_deg(R_hat),
        att_err_deg=att_err,
        sd=np.sqrt(np.clip(np.diagonal(Ps, axis1=1, axis2=2), 0.0, None)),
        anchor_id=anchor_id, rho=rho,
        gravity_axis_var=np.einsum("ki,kij,kj->k", u, Ps[:, ID, ID], u),
        nees_position=np.einsum("ki,ki->k", ex, np.linalg.solve(Ps[:, IX, IX], ex[:, :, None])[:, :, 0]),
        cov_trace=np.trace(Ps, axis1=1, axis2=2),
        imu=imus, ranges=ranges, truth=truths if record_streams else [],
    )
    metrics = RunMetrics(
        rmse_position=float(np.sqrt(np.mean(np.sum(ex**2, axis=1)))),
        rmse_velocity=float(np.sqrt(np.mean(np.sum((v_hat - v) ** 2, axis=1)))),
        rmse_attitude=float(np.sqrt(np.mean(att_err**2))),
        rmse_position_axes=np.sqrt(np.mean(ex**2, axis=0)),
        mean_cov_trace=float(np.mean(log.cov_trace)),
        anchor_counts=counts,
        skipped_updates=skipped,
        cov_asymmetry=float(rel_asym.max()),
        cov_min_eig_ratio=float(eig_ratio.min()),
    )
    return metrics, log


def _run_metrics(scenario: Scenario) -> RunMetrics:
    return run_scenario(scenario)[0]


def _pct(opt: float, seq: float) -> float:
    return (opt - seq) / seq * 100.0


@dataclass
class EnsembleSummary:
    """Paired per-seed metrics for the sequential and greedy policies.

    A seed where either run failed is reported in `failures` and left out of
    the averages.
    """

    seeds: list[int]
    sequential: list[RunMetrics | None]
    greedy: list[RunMetrics | None]
    failures: list[tuple[int, str, str]] = field(default_factory=list)

    METRICS = ("rmse_position", "rmse_velocity", "rmse_attitude")
    COLUMNS = ("run", "pos_seq", "pos_opt", "vel_seq", "vel_opt", "att_seq", "att_opt")

    def _pairs(self):
        return [(s, g) for s, g in zip(self.sequential, self.greedy) if s is not None and g is not None]

    def averages(self) -> dict[str, tuple[float, float]]:
        pairs = self._pairs()
        if not pairs:
            return {m: (math.nan, math.nan) for m in self.METRICS}
        return {
            m: (
                float(np.mean([getattr(s, m) for s, _ in pairs])),
                float(np.mean([getattr(g, m) for _, g in pairs])),
            )
            for m in self.METRICS
        }

    def percent_diff(self) -> dict[str, float]:
        return {m: _pct(opt, seq) for m, (seq, opt) in self.averages().items()}

    def rows(self) -> list[list]:
        """Table rows: one per run, then ``avg`` and ``diff`` (percent) rows."""
        out = []
        for i, (s, g) in enumerate(zip(self.sequential, self.greedy), start=1):
            row = [i]
            for m in self.METRICS:
                row += [math.nan if s is None else getattr(s, m), math.nan if g is None else getattr(g, m)]
            out.append(row)
        avg = self.averages()
        out.append(["avg"] + [v for m in self.METRICS for v in avg[m]])
        diff = self.percent_diff()
        out.append(["diff"] + [v for m in self.METRICS for v in (diff[m], diff[m])])
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(self.COLUMNS)
            for row in self.rows():
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])

    def format_table(self) -> str:
        lines = [
            f"{'run':>5} | {'pos seq':>8} {'pos opt':>8} | {'vel seq':>8} {'vel opt':>8} | {'att seq':>8} {'att opt':>8}",
        ]
        for row in self.rows():
            if row[0] == "diff":
                d = row[1::2]
                lines.append(f"{'diff':>5} | {d[0]:>16.1f}% | {d[1]:>16.1f}% | {d[2]:>16.1f}%")
            else:
                p, pv, v, vv, a, av = row[1:]
                lines.append(f"{row[0]!s:>5} | {p:8.3f} {pv:8.3f} | {v:8.3f} {vv:8.3f} | {a:8.2f} {av:8.2f}")
        return "\n".join(lines)


def monte_carlo(scenario: Scenario, n_runs: int, workers: int | None = None) -> EnsembleSummary:
    """Run seeds ``seed .. seed + n_runs - 1`` under both policies.

    With ``workers > 1`` runs execute in a process pool; results are merged in
    seed order so the summary does not depend on scheduling.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    seeds = [scenario.seed + i for i in range(n_runs)]
    policies = [("sequential", scenario.sequential_policy()), ("greedy", SelectionPolicy.greedy())]
    jobs = [(seed, name, replace(scenario, seed=seed, policy=pol)) for seed in seeds for name, pol in policies]

    def _collect(results):
        summary = EnsembleSummary(seeds, [None] * n_runs, [None] * n_runs)
        for (seed, name, _), res in zip(jobs, results):
            i = seed - scenario.seed
            if isinstance(res, Exception):
                summary.failures.append((seed, name, str(res)))
                continue
            getattr(summary, name)[i] = res
        return summary

    def _safe(fn, sc):
        try:
            return fn(sc)
        except (RunError, FilterError) as exc:
            return exc

    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_metrics, sc) for _, _, sc in jobs]
            results = []
            for fut in futures:
                try:
                    results.append(fut.result())
                except (RunError, FilterError) as exc:
                    results.append(exc)
        return _collect(results)
    return _collect([_safe(_run_metrics, sc) for _, _, sc in jobs])
