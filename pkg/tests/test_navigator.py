import itertools
import math

import numpy as np
import pytest

from skelnav.graph import build_graph
from skelnav.map_io import FREE, OCCUPIED, OccupancyGrid
from skelnav.map_reader import read_map
from skelnav.navigator import (TRANSITIONS, Event, EventKind, MissionConfig, NavigationFSM, NavState,
                               RejectedEventError, RunLog, ScanParams, WaypointRecord, _ranges,
                               destination_poses, format_report, mission_metrics, run_mission,
                               scan_at_waypoint)
from skelnav.planner import PlannerParams, plan
from skelnav.pose import Pose2D, Tolerance, wrap_angle
from skelnav.sim import SimConfig, World
from skelnav.synthetic import free_point

S, E = NavState, EventKind


def open_grid(h=80, w=80):
    cells = np.full((h, w), FREE, np.uint8)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = OCCUPIED
    return OccupancyGrid(cells, 0.1)


# ---------------------------------------------------------------- state machine

def test_every_pair_is_tabled_or_rejected():
    for state, kind in itertools.product(NavState, EventKind):
        ev = Event(kind, 1 if kind is E.WAYPOINTS_REMAINING else None)
        fsm = NavigationFSM(state)
        if (state, kind) in TRANSITIONS:
            tr = fsm.step(ev)
            assert tr.target is TRANSITIONS[(state, kind)][0]
        elif state is S.CHECK_WAYPOINTS and kind is E.WAYPOINTS_REMAINING:
            assert fsm.step(ev).target is S.CHECK_DESTINATION
        else:
            with pytest.raises(RejectedEventError):
                fsm.step(ev)
            assert fsm.state is state


def test_waypoints_remaining_branches():
    fsm = NavigationFSM(S.CHECK_WAYPOINTS)
    assert fsm.step(Event(E.WAYPOINTS_REMAINING, 3)).actions == ("pop_waypoint",)
    fsm = NavigationFSM(S.CHECK_WAYPOINTS)
    assert fsm.step(Event(E.WAYPOINTS_REMAINING, 0)).target is S.HOME
    with pytest.raises(ValueError):
        Event(E.WAYPOINTS_REMAINING)


def test_done_is_terminal():
    fsm = NavigationFSM(S.DONE)
    for kind in EventKind:
        with pytest.raises(RejectedEventError):
            fsm.step(Event(kind, 0 if kind is E.WAYPOINTS_REMAINING else None))


def test_step_accepts_strings():
    fsm = NavigationFSM()
    assert fsm.step("map_loaded").target is S.CHECK_WAYPOINTS


# ---------------------------------------------------------------- scanning

@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_scan_headings(n):
    w = World(open_grid(), start=Pose2D(4.0, 4.0, 0.4))
    res = scan_at_waypoint(w, ScanParams(n, ("stand", "sit")))
    assert not res.failed
    assert len(res.captures) == 2 * n
    for cap in res.captures:
        expect = 0.4 + 2 * math.pi * cap.orientation / n
        assert abs(wrap_angle(cap.pose.psi - expect)) <= 0.08
    assert [c.gesture for c in res.captures] == ["stand", "sit"] * n


def test_scan_single_orientation_does_not_turn():
    w = World(open_grid(), start=Pose2D(4.0, 4.0, 1.0))
    scan_at_waypoint(w, ScanParams(1, ("stand",)))
    assert all(r.wz == 0.0 for r in w.trace)


def test_scan_params_validation():
    with pytest.raises(ValueError):
        ScanParams(0)
    with pytest.raises(ValueError):
        ScanParams(2, ())


# ---------------------------------------------------------------- missions

def test_destination_headings_follow_path():
    pts = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    poses = destination_poses(pts, Pose2D(0.0, 0.0, 0.3))
    assert poses[0].psi == pytest.approx(0.0)
    assert poses[1].psi == pytest.approx(math.pi / 2)
    assert poses[2].psi == pytest.approx(math.pi / 2)  # repeated point keeps heading


def _mission(grid, drift=0.0, seed=0, **kw):
    wps = read_map(grid)
    start = free_point(grid, near=(grid.height - 20, 20))
    planned = plan(build_graph(wps), PlannerParams(1.0, start))
    world = World(grid, SimConfig(drift_rate=drift, seed=seed), Pose2D(*start, 0.0), record_trace=False)
    return planned, world, run_mission(planned.spliced_path, world, MissionConfig(**kw))


def test_drift_free_mission_reaches_everything(l_room):
    planned, world, log = _mission(l_room)
    rep = mission_metrics(log)
    assert rep.reachability == 100.0
    assert rep.n_total == len(planned.spliced_path)
    assert log.state_sequence()[0] == "LoadMap" and log.state_sequence()[-1] == "Done"
    assert not log.aborted
    home = world.start
    assert math.hypot(world.perceived_pose.x - home.x, world.perceived_pose.y - home.y) <= 0.05


def test_interrupt_is_assisted(l_room):
    _, _, log = _mission(l_room, interrupts=(12.0,))
    assisted = [w for w in log.waypoints if w.assisted]
    assert len(assisted) == 1 and assisted[0].reached
    seq = log.state_sequence()
    i = seq.index("ManualControl")
    assert seq[i - 1:i + 3] == ["Move", "ManualControl", "Scan", "CheckWaypoints"]
    assert f"Waypoint {assisted[0].index}." in mission_metrics(log).observations


def test_scanning_mission_captures(l_room):
    planned, _, log = _mission(l_room, scan=ScanParams(2, ("stand",)))
    assert len(log.captures) == 2 * len(planned.spliced_path)


def test_deadline_aborts(l_room):
    _, _, log = _mission(l_room, deadline=5.0)
    assert log.aborted and "deadline" in log.abort_reason
    assert "aborted" in mission_metrics(log).observations


def test_unreachable_goal_is_abandoned():
    grid = open_grid()
    world = World(grid, start=Pose2D(4.0, 4.0, 0.0), record_trace=False)
    pts = np.array([[4.0, 5.0], [0.2, 0.2], [4.0, 4.5]])  # second goal sits in the wall
    log = run_mission(pts, world, MissionConfig(max_retries=2))
    reached = [w.reached for w in log.waypoints]
    assert reached == [True, False, True]
    bad = log.waypoints[1]
    assert bad.attempts == 2 and bad.true_goal_blocked
    assert "abandon" in [e.event for e in log.events]


def test_run_log_write(tmp_path, l_room):
    _, _, log = _mission(l_room)
    lines = log.write(tmp_path / "run.log").read_text().splitlines()
    assert lines[0] == "# t state event detail"
    assert any("map_loaded" in ln for ln in lines)


# ---------------------------------------------------------------- reporting

def test_ranges():
    assert _ranges([1, 2, 3, 5, 7, 8]) == "1-3, 5, 7-8"
    assert _ranges([]) == ""


def test_metrics_median_over_reached():
    log = RunLog(total_time=100.0)
    g = Pose2D(0, 0, 0)
    log.waypoints = [WaypointRecord(1, g, True, duration=2.0), WaypointRecord(2, g, True, duration=4.0),
                     WaypointRecord(3, g, False, duration=50.0), WaypointRecord(4, g, True, duration=9.0)]
    rep = mission_metrics(log)
    assert rep.reachability == 75.0
    assert rep.median_time == 4.0
    assert "1 waypoint unreachable (3)" in rep.observations


def test_format_report_columns():
    log = RunLog(total_time=12.34)
    log.waypoints = [WaypointRecord(1, Pose2D(0, 0), True, duration=1.0)]
    text = format_report([("1", mission_metrics(log))])
    head, row = text.splitlines()
    assert head.startswith("Trial") and "Reachability (%)" in head and head.endswith("Observations")
    assert "100.00" in row and "12.3" in row
