import io
import math

import numpy as np
import pytest

from vlpsim.channel import Luminaire, Photodiode, batch_received_power
from vlpsim.sensors import BaroModel, ImuModel, write_log
from vlpsim.sim import (
    FlightPlan,
    PlanValidationError,
    Testbed,
    default_flight_plans,
    generate_trajectory,
    run_flight,
)


class TestTestbed:
    def test_default_layout(self, testbed):
        assert len(testbed.luminaires) == 4
        assert [l.beacon_frequency for l in testbed.luminaires] == [60.0, 120.0, 240.0, 480.0]
        assert testbed.luminaires[0].position == pytest.approx([0.25, 1.0, 0.0])
        assert testbed.luminaires[0].transmit_power == 4.7
        assert testbed.luminaires[0].lambertian_order == 14.0
        assert testbed.photodiode.area == pytest.approx(5.2e-6)
        assert testbed.photodiode.fov_half_angle == pytest.approx(math.radians(160.0))
        assert np.allclose(testbed.extent, [2.0, 2.0, 2.0])

    def test_rejects_luminaire_outside_extent(self):
        lums = (Luminaire("x", (3.0, 0.0, 0.0), 1.0, 1.0, 60.0),)
        with pytest.raises(ValueError):
            Testbed(np.array([2.0, 2.0, 2.0]), lums, Photodiode(1e-6, 1.0))

    def test_rejects_duplicate_frequencies(self):
        lums = (
            Luminaire("a", (0.5, 0.5, 0.0), 1.0, 1.0, 60.0),
            Luminaire("b", (1.5, 0.5, 0.0), 1.0, 1.0, 60.0),
        )
        with pytest.raises(ValueError):
            Testbed(np.array([2.0, 2.0, 2.0]), lums, Photodiode(1e-6, 1.0))


class TestTrajectory:
    def test_hover_is_constant_and_level(self):
        plan = FlightPlan(kind="hover", duration=5.0, center=(1.0, 1.2), hover_height=0.9)
        traj = generate_trajectory(plan)
        assert np.allclose(traj.positions, [1.0, 1.2, 0.9])
        assert np.all(traj.rolls == 0.0) and np.all(traj.pitches == 0.0)

    def test_zero_tilt_whenever_no_horizontal_accel(self):
        plan = FlightPlan(kind="lift_land", duration=20.0, hover_height=1.5)
        traj = generate_trajectory(plan)
        assert np.all(traj.rolls == 0.0) and np.all(traj.pitches == 0.0)
        assert traj.positions[:, 2].max() == pytest.approx(1.5, abs=1e-9)
        assert traj.positions[0, 2] == pytest.approx(0.05)

    def test_circle_steady_tilt_matches_kinematics(self):
        plan = FlightPlan(kind="circle", duration=40.0, laps=5.0, height_knots=(1.2, 1.2))
        traj = generate_trajectory(plan)
        route_time = 40.0 - 3.0 - 3.0 - 2.0 * 2.0
        omega = 2 * math.pi * 5.0 / (route_time - 2.0)
        v = 0.5 * omega
        expected = math.atan(v * v / (0.5 * 9.81))
        # steady segment: inside the route, away from ramps and knots
        mask = (traj.times > 12.0) & (traj.times < 18.0)
        tilt = np.sqrt(traj.rolls**2 + traj.pitches**2)[mask]
        assert np.allclose(tilt, expected, atol=2e-3)

    def test_tilt_never_exceeds_cap(self):
        for plan in default_flight_plans().values():
            traj = generate_trajectory(plan)
            tilt = np.sqrt(traj.rolls**2 + traj.pitches**2)
            assert tilt.max() <= plan.max_tilt + 1e-12

    def test_positions_stay_inside_testbed(self, testbed):
        for plan in default_flight_plans().values():
            traj = generate_trajectory(plan, extent=testbed.extent)
            assert np.all(traj.positions >= -1e-9)
            assert np.all(traj.positions <= testbed.extent + 1e-9)

    def test_trajectory_is_c2(self):
        # analytic derivatives must match finite differences of the positions
        for name, plan in default_flight_plans().items():
            traj = generate_trajectory(plan)
            dt = 1.0 / plan.frame_rate
            vel_fd = np.gradient(traj.positions, dt, axis=0, edge_order=2)
            acc_fd = np.gradient(traj.velocities, dt, axis=0, edge_order=2)
            assert np.abs(vel_fd - traj.velocities).max() < 5e-3, name
            assert np.abs(acc_fd - traj.accelerations).max() < 5e-2, name

    def test_rejects_plan_leaving_testbed(self):
        plan = FlightPlan(kind="circle", duration=36.0, center=(0.3, 1.0), radius=0.5)
        with pytest.raises(PlanValidationError):
            generate_trajectory(plan, extent=np.array([2.0, 2.0, 2.0]))

    def test_rejects_unknown_kind(self):
        with pytest.raises(PlanValidationError):
            FlightPlan(kind="spiral")

    def test_rejects_too_short_circle(self):
        with pytest.raises(PlanValidationError):
            FlightPlan(kind="circle", duration=10.0)

    def test_waypoint_visits_all_points(self):
        wps = ((1.0, 1.0, 0.5), (1.4, 1.0, 1.0), (1.0, 1.4, 1.5))
        plan = FlightPlan(kind="waypoint", duration=12.0, waypoints=wps)
        traj = generate_trajectory(plan)
        for wp in wps:
            dmin = np.linalg.norm(traj.positions - np.array(wp), axis=1).min()
            assert dmin < 1e-6

    def test_default_battery_has_eight_flights(self):
        assert len(default_flight_plans()) == 8


class TestRunFlight:
    def test_static_rss_round_trip_within_half_percent(self, quiet_testbed):
        plan = FlightPlan(kind="hover", duration=0.5, hover_height=1.0)
        frames = run_flight(quiet_testbed, plan, rng_seed=0)
        traj = generate_trajectory(plan)
        expected = batch_received_power(
            quiet_testbed.luminaires,
            traj.positions[:1],
            traj.rolls[:1],
            traj.pitches[:1],
            quiet_testbed.photodiode,
        )[0]
        assert np.allclose(frames[0].rss, expected, rtol=5e-3)

    def test_bit_identical_logs_for_fixed_seed(self, testbed):
        plan = FlightPlan(kind="circle", duration=18.0, laps=1.0, height_knots=(1.0, 1.2))
        baro = BaroModel(noise_sigma=0.05, drift_rate=0.001, initial_offset=0.03)
        imu = ImuModel(accel_noise_sigma=0.02, angle_noise_sigma=0.004)
        out = []
        for _ in range(2):
            frames = run_flight(testbed, plan, baro, imu, rng_seed=123)
            buf = io.StringIO()
            write_log(frames, buf)
            out.append(buf.getvalue())
        assert out[0] == out[1]

    def test_different_seeds_differ(self, testbed):
        plan = FlightPlan(kind="hover", duration=0.5, hover_height=1.0)
        a = run_flight(testbed, plan, rng_seed=1)
        b = run_flight(testbed, plan, rng_seed=2)
        assert not np.array_equal(a[0].rss, b[0].rss)

    def test_ground_truth_attached_and_timestamps_increase(self, testbed):
        plan = FlightPlan(kind="hover", duration=1.0, hover_height=1.0)
        frames = run_flight(testbed, plan, rng_seed=0)
        assert len(frames) == 50
        times = [f.timestamp for f in frames]
        assert all(b > a for a, b in zip(times, times[1:]))
        assert all(f.ground_truth is not None for f in frames)

    def test_eight_flight_batch_runs(self, testbed):
        logs = [
            run_flight(testbed, plan, rng_seed=[1, i])
            for i, plan in enumerate(default_flight_plans().values())
        ]
        assert len(logs) == 8
        assert all(len(log) > 1000 for log in logs)

    def test_noise_models_applied(self, quiet_testbed):
        plan = FlightPlan(kind="hover", duration=0.5, hover_height=1.0)
        baro = BaroModel(initial_offset=0.25)
        frames = run_flight(quiet_testbed, plan, baro_model=baro, rng_seed=0)
        assert frames[0].baro_altitude == pytest.approx(1.25, abs=1e-9)
