import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangenav.sim import (
    GRAVITY,
    Anchor,
    NoiseParams,
    Segment,
    TrajectoryProfile,
    TruthState,
    anchors_from_rows,
    generate_trajectory,
    synth_imu,
    synth_range,
    write_streams_csv,
)
from rangenav.so3 import is_rotation, rotvec_to_rotation

QUIET = NoiseParams(0.0, 0.0, 0.0)


def truth(x=(0, 0, 0), v=(0, 0, 0), a=(0, 0, 0), R=None, omega=(0, 0, 0)):
    return TruthState(
        0.0, np.array(x, float), np.array(v, float), np.array(a, float),
        np.eye(3) if R is None else R, np.array(omega, float),
    )


def hover_profile(duration=3.0):
    return TrajectoryProfile(np.array([0.0, 0.0, 2.0]), [Segment("hover", duration)])


class TestSynthImu:
    def test_hover_reads_gravity_reaction(self):
        imu = synth_imu(truth(), QUIET, np.random.default_rng(0))
        assert np.array_equal(imu.alpha_m, [0.0, 0.0, 9.81])
        assert np.array_equal(imu.gamma, np.zeros(3))

    def test_free_fall_reads_zero(self):
        imu = synth_imu(truth(a=GRAVITY), QUIET, np.random.default_rng(0))
        assert np.array_equal(imu.alpha_m, np.zeros(3))

    def test_rolled_hover_rotates_the_reading(self):
        R = rotvec_to_rotation([np.pi / 2, 0.0, 0.0])
        imu = synth_imu(truth(R=R), QUIET, np.random.default_rng(0))
        assert np.allclose(imu.alpha_m, R.T @ [0.0, 0.0, 9.81], atol=1e-12)
        assert np.linalg.norm(imu.alpha_m) == pytest.approx(9.81, abs=1e-12)

    def test_gyro_reads_body_rate(self):
        imu = synth_imu(truth(omega=(0.1, -0.2, 0.3)), QUIET, np.random.default_rng(0))
        assert np.array_equal(imu.gamma, [0.1, -0.2, 0.3])

    def test_noise_statistics(self):
        rng = np.random.default_rng(3)
        noise = NoiseParams(0.5, 0.01, 0.0)
        samples = [synth_imu(truth(), noise, rng) for _ in range(20000)]
        acc = np.array([s.alpha_m for s in samples]) - [0.0, 0.0, 9.81]
        gyr = np.array([s.gamma for s in samples])
        assert np.allclose(acc.std(axis=0), 0.5, rtol=0.03)
        assert np.allclose(gyr.std(axis=0), 0.01, rtol=0.03)
        assert abs(np.corrcoef(acc[:, 0], acc[:, 1])[0, 1]) < 0.03


class TestSynthRange:
    def test_axis_aligned(self):
        m = synth_range(truth(x=(0, 0, 2)), Anchor(1, np.zeros(3)), QUIET, np.random.default_rng(0))
        assert m.rho == 2.0
        assert m.anchor_id == 1

    def test_three_four_five(self):
        m = synth_range(truth(x=(3, 4, 0)), Anchor(2, np.zeros(3)), QUIET, np.random.default_rng(0))
        assert m.rho == 5.0

    def test_noise_std_matches(self):
        rng = np.random.default_rng(11)
        noise = NoiseParams(sigma_rho=0.1)
        t, a = truth(x=(1, 2, 3)), Anchor(1, np.zeros(3))
        err = np.array([synth_range(t, a, noise, rng).rho for _ in range(100_000)]) - np.sqrt(14.0)
        assert err.std() == pytest.approx(0.1, rel=0.05)

    def test_negative_ranges_are_clamped(self):
        rng = np.random.default_rng(0)
        noise = NoiseParams(sigma_rho=1.0)
        t = truth(x=(0, 0, 0.01))
        rhos = [synth_range(t, Anchor(1, np.zeros(3)), noise, rng).rho for _ in range(200)]
        assert min(rhos) == 0.0


def test_same_seed_gives_identical_streams():
    def stream(seed):
        rng = np.random.default_rng(seed)
        noise = NoiseParams()
        out = []
        for s in generate_trajectory(TrajectoryProfile.paper_default(), 0.05):
            out.append(synth_imu(s, noise, rng).alpha_m)
            out.append([synth_range(s, Anchor(1, np.zeros(3)), noise, rng).rho])
        return np.concatenate(out)

    assert np.array_equal(stream(4), stream(4))
    assert not np.array_equal(stream(4), stream(5))


class TestTrajectory:
    def test_pure_hover_is_static(self):
        for s in generate_trajectory(hover_profile(), 0.01):
            assert np.array_equal(s.x, [0.0, 0.0, 2.0])
            assert np.array_equal(s.v, np.zeros(3))
            assert np.array_equal(s.a, np.zeros(3))

    def test_default_profile_stays_in_x_zero_plane(self):
        states = generate_trajectory(TrajectoryProfile.paper_default(), 0.002)
        xs = np.array([s.x for s in states])
        assert np.max(np.abs(xs[:, 0])) == 0.0

    def test_default_profile_shape(self):
        prof = TrajectoryProfile.paper_default()
        assert prof.duration == pytest.approx(12.0)
        # takeoff for 1 s, hover 2 s at 2 m, then the sweep
        for t in (1.0, 2.0, 3.0):
            s = prof.evaluate(t)
            assert np.allclose(s.x, [0, 0, 2], atol=1e-12)
            assert np.allclose(s.v, 0.0, atol=1e-12)
        xs = np.array([s.x for s in generate_trajectory(prof, 0.01)])
        assert xs[:, 1].max() == pytest.approx(1.5)
        assert xs[:, 1].min() == pytest.approx(-1.5)
        assert np.allclose(xs[-1], 0.0, atol=1e-12)
        assert np.allclose(xs[0], 0.0, atol=1e-12)

    def test_uniform_sampling(self):
        states = generate_trajectory(TrajectoryProfile.paper_default(), 0.002)
        ts = np.array([s.t for s in states])
        assert len(states) == 6001
        assert np.allclose(np.diff(ts), 0.002, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("yaw_rate", [0.0, 0.3])
    def test_finite_difference_matches_velocity(self, yaw_rate):
        dt = 0.002
        states = generate_trajectory(TrajectoryProfile.paper_default(yaw_rate=yaw_rate), dt)
        x = np.array([s.x for s in states])
        v = np.array([s.v for s in states])
        a = np.array([s.a for s in states])
        # central difference is second order; the bound is a small multiple of dt
        assert np.max(np.abs((x[2:] - x[:-2]) / (2 * dt) - v[1:-1])) < dt
        # acceleration is continuous but jerk jumps at segment joins, where the
        # central difference is off by jerk * dt / 4; takeoff peaks at 120 m/s^3
        assert np.max(np.abs((v[2:] - v[:-2]) / (2 * dt) - a[1:-1])) < 120.0 * dt / 4 * 1.01

    def test_rotations_stay_in_so3_with_yaw(self):
        prof = TrajectoryProfile.paper_default(yaw_rate=0.7)
        for s in generate_trajectory(prof, 0.002):
            assert is_rotation(s.R, tol=1e-9)
            assert np.array_equal(s.omega, [0.0, 0.0, 0.7])

    def test_rejects_velocity_jump(self):
        with pytest.raises(ValueError, match="velocity"):
            TrajectoryProfile(
                np.zeros(3),
                [Segment("hover", 1.0), Segment("cruise", 1.0, np.array([1.0, 0.0, 0.0]))],
            )

    def test_profile_must_end_at_rest(self):
        with pytest.raises(ValueError):
            TrajectoryProfile(np.zeros(3), [Segment("cruise", 1.0, np.array([1.0, 0.0, 0.0]))])

    def test_rejects_unknown_kind_and_bad_duration(self):
        with pytest.raises(ValueError):
            TrajectoryProfile(np.zeros(3), [Segment("loop", 1.0)])
        with pytest.raises(ValueError):
            TrajectoryProfile(np.zeros(3), [Segment("hover", 0.0)])

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            generate_trajectory(hover_profile(), 0.0)

    def test_sample_agrees_with_evaluate(self):
        prof = TrajectoryProfile.paper_default(yaw_rate=0.2)
        ts = np.linspace(-0.1, 12.5, 97)
        x, v, a, yaw = prof.sample(ts)
        for k, t in enumerate(ts):
            s = prof.evaluate(t)
            assert np.allclose(s.x, x[k], atol=1e-12)
            assert np.allclose(s.v, v[k], atol=1e-12)
            assert np.allclose(s.a, a[k], atol=1e-12)

    @settings(max_examples=30)
    @given(
        st.lists(
            st.tuples(
                st.floats(0.2, 3.0),
                st.floats(-3.0, 3.0),
                st.floats(-3.0, 3.0),
                st.floats(0.0, 3.0),
            ),
            min_size=1,
            max_size=5,
        )
    )
    def test_random_move_chains_are_continuous(self, legs):
        prof = TrajectoryProfile(
            np.zeros(3), [Segment("move", d, np.array([x, y, z])) for d, x, y, z in legs]
        )
        ts = np.linspace(0.0, prof.duration, 400)
        x, v, _, _ = prof.sample(ts)
        eps = 1e-7
        xp, vp, _, _ = prof.sample(ts + eps)
        assert np.max(np.abs(xp - x)) < 1e-5
        assert np.max(np.abs(vp - v)) < 1e-4

    def test_from_dict_forms(self):
        p = TrajectoryProfile.from_dict({"type": "paper", "hover_s": 3.0})
        assert p.duration == pytest.approx(13.0)
        q = TrajectoryProfile.from_dict(
            {"start": [0, 0, 2], "segments": [{"kind": "hover", "duration": 2.0}]}
        )
        assert q.duration == 2.0
        assert np.array_equal(q.evaluate(1.0).x, [0.0, 0.0, 2.0])


class TestParams:
    def test_noise_rejects_negative(self):
        with pytest.raises(ValueError):
            NoiseParams(sigma_rho=-0.1)

    def test_range_variance(self):
        assert NoiseParams(sigma_rho=0.2).r == pytest.approx(0.04)

    def test_anchor_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Anchor(1, np.array([0.0, np.nan, 0.0]))

    def test_anchor_ids_must_be_unique(self):
        with pytest.raises(ValueError, match="duplicate"):
            anchors_from_rows([[1, 0, 0, 0], [1, 1, 0, 0]])


def test_streams_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    prof = TrajectoryProfile.paper_default()
    states = generate_trajectory(prof, 0.5)
    imu = [synth_imu(s, NoiseParams(), rng) for s in states]
    ranges = [synth_range(s, Anchor(3, np.zeros(3)), NoiseParams(), rng) for s in states[1:]]
    path = tmp_path / "streams.csv"
    write_streams_csv(path, states, imu, ranges)
    with open(path) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == len(states) + len(imu) + len(ranges)
    ts = [float(r["t"]) for r in rows]
    assert ts == sorted(ts)
    first_range = next(r for r in rows if r["kind"] == "range")
    assert float(first_range["rho"]) == ranges[0].rho
    first_imu = next(r for r in rows if r["kind"] == "imu")
    assert float(first_imu["alpha_x"]) == imu[0].alpha_m[0]
