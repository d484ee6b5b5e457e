"""Mission state machine: visit, scan, and return home.

States follow the load / check / move / scan / manual / home cycle. The
machine itself is a pure transition table; :func:`run_mission` drives it
against a :class:`~skelnav.sim.World`.
"""

from __future__ import annotations

import enum
import math
import os
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .pose import Pose2D, Tolerance, at_destination, bearing
from .sim import SimulatorFault, World


class NavState(str, enum.Enum):
    LOAD_MAP = "LoadMap"
    CHECK_WAYPOINTS = "CheckWaypoints"
    CHECK_DESTINATION = "CheckDestination"
    MOVE = "Move"
    SCAN = "Scan"
    MANUAL_CONTROL = "ManualControl"
    HOME = "Home"
    DONE = "Done"


class EventKind(str, enum.Enum):
    MAP_LOADED = "map_loaded"
    WAYPOINTS_REMAINING = "waypoints_remaining"
    NO_WAYPOINTS = "no_waypoints"
    AT_DEST = "at_dest"
    NOT_AT_DEST = "not_at_dest"
    NAV_SUCCESS = "nav_success"
    NAV_TIMEOUT = "nav_timeout"
    OPERATOR_INTERRUPT = "operator_interrupt"
    OPERATOR_RELEASE = "operator_release"
    SCAN_DONE = "scan_done"
    HOME_REACHED = "home_reached"
    ABANDON = "abandon"  # retry budget exhausted at CheckDestination


@dataclass(frozen=True)
class Event:
    kind: EventKind
    remaining: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        if self.kind is EventKind.WAYPOINTS_REMAINING and (self.remaining is None or self.remaining < 0):
            raise ValueError("waypoints_remaining needs a count >= 0")

    def __str__(self) -> str:
        if self.kind is EventKind.WAYPOINTS_REMAINING:
            return f"{self.kind.value}({self.remaining})"
        return self.kind.value


class RejectedEventError(ValueError):
    def __init__(self, state: NavState, event: Event):
        super().__init__(f"event {event} is not valid in state {state.value}")
        self.state = state
        self.event = event


S, E = NavState, EventKind

# (state, event) -> (next state, actions)
TRANSITIONS: dict[tuple[NavState, EventKind], tuple[NavState, tuple[str, ...]]] = {
    (S.LOAD_MAP, E.MAP_LOADED): (S.CHECK_WAYPOINTS, ()),
    (S.CHECK_WAYPOINTS, E.NO_WAYPOINTS): (S.HOME, ("go_home",)),
    (S.CHECK_DESTINATION, E.AT_DEST): (S.SCAN, ("scan",)),
    (S.CHECK_DESTINATION, E.NOT_AT_DEST): (S.MOVE, ("navigate",)),
    (S.CHECK_DESTINATION, E.ABANDON): (S.SCAN, ("skip_scan",)),
    (S.MOVE, E.NAV_SUCCESS): (S.CHECK_DESTINATION, ()),
    (S.MOVE, E.NAV_TIMEOUT): (S.CHECK_DESTINATION, ()),
    (S.MOVE, E.OPERATOR_INTERRUPT): (S.MANUAL_CONTROL, ("cancel_navigation",)),
    (S.MANUAL_CONTROL, E.OPERATOR_RELEASE): (S.SCAN, ("scan",)),
    (S.SCAN, E.SCAN_DONE): (S.CHECK_WAYPOINTS, ()),
    (S.HOME, E.HOME_REACHED): (S.DONE, ("lie_down",)),
}


@dataclass(frozen=True)
class Transition:
    source: NavState
    event: Event
    target: NavState
    actions: tuple[str, ...]


@dataclass
class NavigationFSM:
    state: NavState = NavState.LOAD_MAP

    def resolve(self, event: Event) -> tuple[NavState, tuple[str, ...]]:
        if self.state is S.CHECK_WAYPOINTS and event.kind is E.WAYPOINTS_REMAINING:
            if event.remaining > 0:
                return S.CHECK_DESTINATION, ("pop_waypoint",)
            return S.HOME, ("go_home",)
        try:
            return TRANSITIONS[(self.state, event.kind)]
        except KeyError:
            raise RejectedEventError(self.state, event) from None

    def step(self, event: Event | EventKind | str) -> Transition:
        """Apply one event; invalid events raise and leave the state untouched."""
        if not isinstance(event, Event):
            event = Event(EventKind(event))
        target, actions = self.resolve(event)
        tr = Transition(self.state, event, target, actions)
        self.state = target
        return tr


def step(fsm: NavigationFSM, event: Event | EventKind | str) -> Transition:
    return fsm.step(event)


# ------------------------------------------------------------------ mission

@dataclass(frozen=True)
class ScanParams:
    orientations: int = 4
    gestures: tuple[str, ...] = ("stand", "sit")
    gesture_duration: float = 1.0

    def __post_init__(self):
        if self.orientations < 1:
            raise ValueError("need at least one orientation")
        if not self.gestures:
            raise ValueError("need at least one gesture")


@dataclass(frozen=True)
class Capture:
    orientation: int
    gesture: str
    heading: float  # commanded heading
    pose: Pose2D  # perceived pose at capture time
    t: float


@dataclass
class ScanResult:
    captures: list[Capture]
    failed: bool = False


@dataclass(frozen=True)
class LogEvent:
    t: float
    state: str
    event: str
    detail: str = ""


@dataclass
class WaypointRecord:
    index: int  # 1-based, in visit order
    goal: Pose2D
    reached: bool = False
    assisted: bool = False
    attempts: int = 0
    duration: float = 0.0
    blocked: bool = False
    true_goal: Pose2D | None = None
    true_goal_blocked: bool = False


@dataclass
class RunLog:
    events: list[LogEvent] = field(default_factory=list)
    waypoints: list[WaypointRecord] = field(default_factory=list)
    captures: list[Capture] = field(default_factory=list)
    total_time: float = 0.0
    aborted: bool = False
    abort_reason: str = ""

    def add(self, t: float, state: NavState | str, event: str, detail: str = "") -> None:
        state = state.value if isinstance(state, NavState) else state
        self.events.append(LogEvent(round(t, 6), state, event, detail))

    def state_sequence(self) -> list[str]:
        """States entered, in order (consecutive duplicates collapsed)."""
        seq: list[str] = []
        for ev in self.events:
            if ev.event.startswith("enter") and (not seq or seq[-1] != ev.state):
                seq.append(ev.state)
        return seq

    def write(self, path: str | os.PathLike) -> Path:
        lines = ["# t state event detail"]
        for ev in self.events:
            detail = ev.detail.replace("\n", " ")
            lines.append(f"{ev.t:.2f} {ev.state} {ev.event} {detail}".rstrip())
        path = Path(path)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def scan_at_waypoint(world: World, scan: ScanParams, tol: Tolerance = Tolerance(),
                     log: RunLog | None = None) -> ScanResult:
    """Capture every gesture at N evenly spaced headings, turning in place between."""
    start = world.perceived_pose
    theta0 = start.psi
    captures: list[Capture] = []
    for n in range(scan.orientations):
        heading = theta0 + 2 * math.pi * n / scan.orientations
        for g in scan.gestures:
            world.wait(scan.gesture_duration)
            if log is not None:
                log.add(world.t, S.SCAN, "gesture", g)
            cap = Capture(n, g, heading, world.perceived_pose, world.t)
            captures.append(cap)
            if log is not None:
                log.add(world.t, S.SCAN, "capture", f"orientation={n} gesture={g} heading={heading:.4f}")
        nxt = theta0 + 2 * math.pi * (n + 1) / scan.orientations
        pose = world.perceived_pose
        goal = Pose2D(pose.x, pose.y, nxt)
        if at_destination(pose, goal, tol):
            continue
        res = world.goto_pose(goal, Tolerance(max(tol.position, 0.1), tol.yaw, tol.timeout))
        if not res.success:
            if log is not None:
                log.add(world.t, S.SCAN, "scan_failed", f"rotation to {nxt:.4f} {res.status}")
            return ScanResult(captures, failed=True)
    return ScanResult(captures)


@dataclass(frozen=True)
class MissionConfig:
    tolerance: Tolerance = Tolerance()
    scan: ScanParams | None = None  # None disables scanning
    interrupts: tuple[float, ...] = ()
    max_retries: int = 5
    assist_delay: float = 5.0
    deadline: float = 7200.0
    use_router: bool = True


def destination_poses(points: np.ndarray, start: Pose2D) -> list[Pose2D]:
    """Goal pose per waypoint; heading is the bearing from the previous point."""
    poses = []
    prev, prev_yaw = start.xy, start.psi
    for x, y in np.asarray(points, dtype=float).reshape(-1, 2).tolist():
        yaw = bearing(prev, (x, y), default=prev_yaw)
        poses.append(Pose2D(x, y, yaw))
        prev, prev_yaw = (x, y), yaw
    return poses


def run_mission(points: np.ndarray, world: World, config: MissionConfig = MissionConfig()) -> RunLog:
    """Drive the state machine over the spliced waypoints until Done or the deadline."""
    fsm = NavigationFSM()
    log = RunLog()
    tol = config.tolerance
    pending_interrupts = sorted(config.interrupts)
    queue = list(destination_poses(points, world.start))
    log.waypoints = [WaypointRecord(i + 1, g) for i, g in enumerate(queue)]
    current: WaypointRecord | None = None
    t_popped = 0.0
    timeouts = 0
    next_index = 0

    def fire(event: Event, detail: str = "") -> Transition:
        tr = fsm.step(event)
        log.add(world.t, tr.source, str(event), detail)
        log.add(world.t, tr.target, "enter")
        return tr

    log.add(world.t, S.LOAD_MAP, "enter")
    fire(Event(E.MAP_LOADED), f"{len(queue)} waypoints")
    try:
        while fsm.state is not S.DONE:
            if world.t > config.deadline:
                raise SimulatorFault(f"deadline of {config.deadline:.0f} s exceeded")
            state = fsm.state
            if state is S.CHECK_WAYPOINTS:
                remaining = len(queue) - next_index
                fire(Event(E.WAYPOINTS_REMAINING, remaining))
                if remaining:
                    current = log.waypoints[next_index]
                    next_index += 1
                    t_popped = world.t
                    timeouts = 0
            elif state is S.CHECK_DESTINATION:
                if at_destination(world.perceived_pose, current.goal, tol):
                    current.reached = True
                    current.duration = world.t - t_popped
                    fire(Event(E.AT_DEST), f"waypoint {current.index}")
                elif timeouts >= config.max_retries:
                    current.duration = world.t - t_popped
                    true_goal = world.to_true(current.goal)
                    current.true_goal = true_goal
                    current.true_goal_blocked = world.field.collides(true_goal.x, true_goal.y)
                    fire(Event(E.ABANDON), f"waypoint {current.index} unreached after {timeouts} timeouts")
                else:
                    fire(Event(E.NOT_AT_DEST), f"waypoint {current.index}")
            elif state is S.MOVE:
                current.attempts += 1
                interrupt_at = pending_interrupts[0] if pending_interrupts else None
                via = ()
                if config.use_router:
                    via = world.router.route(world.perceived_pose.xy, current.goal.xy)[:-1]
                res = world.goto_pose(current.goal, tol, tol.timeout, via=via, interrupt_at=interrupt_at)
                current.blocked |= res.blocked
                if res.status == "interrupted":
                    pending_interrupts.pop(0)
                    fire(Event(E.OPERATOR_INTERRUPT), f"waypoint {current.index}")
                elif res.success:
                    fire(Event(E.NAV_SUCCESS), f"{res.elapsed:.2f}s")
                else:
                    timeouts += 1
                    fire(Event(E.NAV_TIMEOUT), f"{res.elapsed:.2f}s blocked={res.blocked}")
            elif state is S.MANUAL_CONTROL:
                world.wait(config.assist_delay)
                world.teleport_perceived(current.goal)
                current.reached = True
                current.assisted = True
                current.duration = world.t - t_popped
                fire(Event(E.OPERATOR_RELEASE), f"operator placed robot at waypoint {current.index}")
            elif state is S.SCAN:
                if current.reached and config.scan is not None:
                    res = scan_at_waypoint(world, config.scan, tol, log)
                    log.captures.extend(res.captures)
                    detail = f"{len(res.captures)} captures" + (" (failed)" if res.failed else "")
                else:
                    detail = "skipped" if not current.reached else "scanning disabled"
                fire(Event(E.SCAN_DONE), detail)
            elif state is S.HOME:
                home = world.start
                ok = at_destination(world.perceived_pose, home, tol)
                tries = 0
                while not ok and tries < config.max_retries:
                    via = world.router.route(world.perceived_pose.xy, home.xy)[:-1] if config.use_router else ()
                    ok = world.goto_pose(home, tol, tol.timeout, via=via).success
                    tries += 1
                log.add(world.t, S.HOME, "gesture", "lie_down")
                fire(Event(E.HOME_REACHED), "at start" if ok else "home not reached within retries")
            else:  # pragma: no cover
                raise RuntimeError(f"unhandled state {state}")
    except SimulatorFault as exc:
        log.aborted = True
        log.abort_reason = str(exc)
        log.add(world.t, fsm.state, "abort", str(exc))
    log.total_time = world.t
    return log


# ------------------------------------------------------------------ metrics

@dataclass(frozen=True)
class MissionReport:
    n_total: int
    n_reached: int
    reachability: float
    total_time: float
    median_time: float | None
    mean_time: float | None
    std_time: float | None
    observations: str

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _ranges(nums: Sequence[int]) -> str:
    out, i = [], 0
    while i < len(nums):
        j = i
        while j + 1 < len(nums) and nums[j + 1] == nums[j] + 1:
            j += 1
        out.append(str(nums[i]) if i == j else f"{nums[i]}-{nums[j]}")
        i = j + 1
    return ", ".join(out)


def mission_metrics(log: RunLog) -> MissionReport:
    n = len(log.waypoints)
    reached = [w for w in log.waypoints if w.reached]
    times = [w.duration for w in reached]
    notes = []
    assisted = [w.index for w in log.waypoints if w.assisted]
    if assisted:
        noun = "Waypoint" if len(assisted) == 1 else "Waypoints"
        notes.append(f"Human assistance required at {noun} {_ranges(assisted)}.")
    stalled = [w.index for w in log.waypoints if w.reached and w.attempts > 1]
    if stalled:
        noun = "Waypoint" if len(stalled) == 1 else "Waypoints"
        notes.append(f"Robot stalled at {noun} {_ranges(stalled)} due to replanning.")
    missed = [w.index for w in log.waypoints if not w.reached]
    if missed:
        noun = "waypoint" if len(missed) == 1 else "waypoints"
        notes.append(f"{len(missed)} {noun} unreachable ({_ranges(missed)}).")
    if log.aborted:
        notes.append(f"Mission aborted: {log.abort_reason}.")
    return MissionReport(
        n_total=n,
        n_reached=len(reached),
        reachability=100.0 * len(reached) / n if n else 0.0,
        total_time=log.total_time,
        median_time=statistics.median(times) if times else None,
        mean_time=statistics.fmean(times) if times else None,
        std_time=statistics.pstdev(times) if len(times) > 1 else None,
        observations=" ".join(notes) or "-",
    )


def format_report(rows: Sequence[tuple[str, MissionReport]]) -> str:
    """Aligned text table: trial, reachability, total time, median time, observations."""
    head = ("Trial", "Reachability (%)", "Total Time (s)", "Median Time per Waypoint (s)", "Observations")
    body = [
        (name, f"{r.reachability:.2f}", f"{r.total_time:.1f}",
         "-" if r.median_time is None else f"{r.median_time:.2f}", r.observations)
        for name, r in rows
    ]
    widths = [max(len(head[i]), *(len(b[i]) for b in body)) if body else len(head[i]) for i in range(4)]
    fmt = lambda cols: "  ".join(c.ljust(w) for c, w in zip(cols[:4], widths)) + "  " + cols[4]
    return "\n".join([fmt(head)] + [fmt(b) for b in body]) + "\n"
