"""Deterministic planar world standing in for the robot and its local navigation.

The robot is a point with a circular footprint moving under body-frame
velocity commands (explicit Euler, fixed ``dt``). Occupied and unknown map
cells are obstacles. Localization drift is a heading bias that rotates the
perceived frame about the start pose; the controller only sees the
perceived pose, collisions are checked on the true pose.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .map_io import FREE, OccupancyGrid
from .pose import Pose2D, Tolerance, wrap_angle


class SimulatorFault(RuntimeError):
    pass


class OutOfMapError(SimulatorFault, ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    max_vx: float = 1.0
    max_vy: float = 0.5
    max_wz: float = 0.8
    dt: float = 0.01
    robot_radius: float = 0.35
    drift_rate: float = 0.0
    seed: int = 0
    k_lin: float = 1.5
    k_ang: float = 2.0
    axis_order: str = "row_col"

    def __post_init__(self):
        if min(self.max_vx, self.max_vy, self.max_wz) <= 0:
            raise ValueError("velocity limits must be positive")
        if not 0 < self.dt <= 0.1:
            raise ValueError(f"dt must lie in (0, 0.1], got {self.dt}")
        if self.robot_radius < 0:
            raise ValueError("robot_radius must be >= 0")
        if self.drift_rate < 0:
            raise ValueError("drift_rate must be >= 0")


@dataclass(frozen=True)
class NavResult:
    status: str  # "success" | "timeout" | "interrupted"
    elapsed: float
    blocked: bool = False

    @property
    def success(self) -> bool:
        return self.status == "success"


def _clamp(v: float, lim: float) -> float:
    return max(-lim, min(lim, v))


def _footprint(radius: float, res: float) -> np.ndarray:
    """Offsets whose cell square lies within ``radius`` of the centre cell's centre."""
    span = int(math.ceil(radius / res)) + 1
    d = np.arange(-span, span + 1)
    di, dj = np.meshgrid(d, d, indexing="ij")
    gap = np.hypot(np.maximum(np.abs(di) - 0.5, 0), np.maximum(np.abs(dj) - 0.5, 0)) * res
    return gap <= radius


class ObstacleField:
    """Collision queries against the non-free cells of a map.

    Positions are quantized to the nearest cell centre; a cell is blocked
    when any obstacle cell square lies within the robot radius of its centre.
    Outside the map counts as obstacle.
    """

    def __init__(self, grid: OccupancyGrid, radius: float, axis_order: str = "row_col"):
        self.grid = grid
        self.radius = radius
        self.axis_order = axis_order
        self.res = grid.resolution
        self._pad = int(math.ceil(radius / self.res)) + 2
        self.occ = np.pad(grid.cells != FREE, self._pad, constant_values=True)
        self.blocked = ndimage.binary_dilation(self.occ, _footprint(radius, self.res))

    def inflate(self, extra: float) -> np.ndarray:
        """Blocked mask (map-sized) for a footprint grown by ``extra`` meters."""
        grown = ndimage.binary_dilation(self.occ, _footprint(self.radius + extra, self.res))
        p = self._pad
        return grown[p:p + self.grid.height, p:p + self.grid.width]

    def _cells(self, xs, ys):
        pts = np.stack([np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)], axis=-1)
        rc = self.grid.world_to_pixel(pts, self.axis_order)
        return np.rint(rc[..., 0]).astype(np.int64) + self._pad, np.rint(rc[..., 1]).astype(np.int64) + self._pad

    def inside(self, x: float, y: float) -> bool:
        r, c = self._cells(x, y)
        p = self._pad
        return bool(p <= r < self.grid.height + p and p <= c < self.grid.width + p)

    def collides_many(self, xs, ys) -> np.ndarray:
        r, c = self._cells(xs, ys)
        h, w = self.blocked.shape
        ok = (r >= 0) & (r < h) & (c >= 0) & (c < w)
        out = np.ones(r.shape, dtype=bool)
        out[ok] = self.blocked[r[ok], c[ok]]
        return out

    def collides(self, x: float, y: float) -> bool:
        return bool(self.collides_many(x, y))

    def segment_clear(self, a: Sequence[float], b: Sequence[float]) -> bool:
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        t = np.linspace(0.0, 1.0, max(2, int(math.ceil(length / (0.25 * self.res))) + 1))
        xs = a[0] + t * (b[0] - a[0])
        ys = a[1] + t * (b[1] - a[1])
        return not self.collides_many(xs, ys).any()


class Router:
    """Grid shortest-path router over cells with enough clearance.

    Produces straight-line via points for :meth:`World.goto_pose`; consecutive
    via points always have a clear segment between them.
    """

    def __init__(self, field_: ObstacleField):
        self.field = field_
        g = field_.grid
        self.safe = ~field_.inflate(0.5 * g.resolution)
        self.index = np.full(self.safe.shape, -1, dtype=np.int64)
        rows, cols = np.nonzero(self.safe)
        self.index[rows, cols] = np.arange(rows.size)
        self.cells = np.stack([rows, cols], axis=1)
        self.points = g.pixel_to_world(rows, cols, field_.axis_order).reshape(-1, 2)
        src, dst, wt = [], [], []
        for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
            r2, c2 = rows + dr, cols + dc
            ok = (r2 >= 0) & (r2 < g.height) & (c2 >= 0) & (c2 < g.width)
            ok[ok] = self.safe[r2[ok], c2[ok]]
            src.append(self.index[rows[ok], cols[ok]])
            dst.append(self.index[r2[ok], c2[ok]])
            wt.append(np.full(ok.sum(), g.resolution * math.hypot(dr, dc)))
        n = rows.size
        self.graph = coo_matrix(
            (np.concatenate(wt), (np.concatenate(src), np.concatenate(dst))), shape=(n, n)
        ).tocsr()

    def _nearest_visible(self, xy: np.ndarray) -> int | None:
        if len(self.points) == 0:
            return None
        d = np.hypot(*(self.points - xy).T)
        for i in np.argsort(d, kind="stable")[:64]:
            if self.field.segment_clear(xy, self.points[i]):
                return int(i)
        return None

    def route(self, start: Sequence[float], goal: Sequence[float]) -> list[tuple[float, float]]:
        """Via points from ``start`` to ``goal`` (goal included, start excluded)."""
        a = np.asarray(start, dtype=float)
        b = np.asarray(goal, dtype=float)
        if self.field.segment_clear(a, b):
            return [tuple(b)]
        s = self._nearest_visible(a)
        t = self._nearest_visible(b)
        if s is None or t is None:
            return [tuple(b)]
        _, pred = dijkstra(self.graph, directed=False, indices=t, return_predecessors=True)
        if s != t and pred[s] < 0:
            return [tuple(b)]
        chain = [s]
        while chain[-1] != t:
            chain.append(int(pred[chain[-1]]))
        pts = [a] + [self.points[i] for i in chain] + [b]
        # greedy line-of-sight shortcutting
        out, i = [], 0
        while i < len(pts) - 1:
            j = i + 1
            while j + 1 < len(pts) and self.field.segment_clear(pts[i], pts[j + 1]):
                j += 1
            out.append((float(pts[j][0]), float(pts[j][1])))
            i = j
        return out


@dataclass
class TraceRow:
    t: float
    x: float
    y: float
    psi: float
    px: float
    py: float
    ppsi: float
    vx: float = 0.0
    vy: float = 0.0
    wz: float = 0.0


class World:
    """One simulated robot on one map."""

    def __init__(self, grid: OccupancyGrid, config: SimConfig = SimConfig(),
                 start: Pose2D = Pose2D(0.0, 0.0, 0.0), record_trace: bool = True):
        self.grid = grid
        self.config = config
        self.field = ObstacleField(grid, config.robot_radius, config.axis_order)
        self.start = start
        self.true_pose = start
        self.bias = 0.0
        self.t = 0.0
        self.rng = np.random.default_rng(config.seed)
        self.record_trace = record_trace
        self.trace: list[TraceRow] = []
        self._router: Router | None = None
        self._log_trace(0.0, 0.0, 0.0)

    @property
    def router(self) -> Router:
        if self._router is None:
            self._router = Router(self.field)
        return self._router

    # -- frames -------------------------------------------------------
    def _to_perceived(self, pose: Pose2D) -> Pose2D:
        if self.bias == 0.0:
            return pose
        c, s = math.cos(self.bias), math.sin(self.bias)
        dx, dy = pose.x - self.start.x, pose.y - self.start.y
        return Pose2D(self.start.x + c * dx - s * dy, self.start.y + s * dx + c * dy, pose.psi + self.bias)

    def to_true(self, pose: Pose2D) -> Pose2D:
        """Where the robot truly is when its perceived pose equals ``pose``."""
        if self.bias == 0.0:
            return pose
        c, s = math.cos(-self.bias), math.sin(-self.bias)
        dx, dy = pose.x - self.start.x, pose.y - self.start.y
        return Pose2D(self.start.x + c * dx - s * dy, self.start.y + s * dx + c * dy, pose.psi - self.bias)

    @property
    def perceived_pose(self) -> Pose2D:
        return self._to_perceived(self.true_pose)

    def inject_drift(self, dt: float) -> Pose2D:
        """Advance the heading-bias random walk by one step of length ``dt``."""
        if self.config.drift_rate > 0:
            self.bias += float(self.rng.normal(0.0, self.config.drift_rate * math.sqrt(dt)))
        return self.perceived_pose

    # -- stepping -----------------------------------------------------
    def _log_trace(self, vx, vy, wz):
        if self.record_trace:
            p, q = self.true_pose, self.perceived_pose
            self.trace.append(TraceRow(self.t, p.x, p.y, p.psi, q.x, q.y, q.psi, vx, vy, wz))

    def step(self, vx: float, vy: float, wz: float) -> bool:
        """Apply clamped body velocities for one ``dt``; returns False if blocked."""
        cfg = self.config
        vx, vy, wz = _clamp(vx, cfg.max_vx), _clamp(vy, cfg.max_vy), _clamp(wz, cfg.max_wz)
        p = self.true_pose
        c, s = math.cos(p.psi), math.sin(p.psi)
        nx = p.x + (c * vx - s * vy) * cfg.dt
        ny = p.y + (s * vx + c * vy) * cfg.dt
        moved = True
        # entering blocked space is refused; leaving it is allowed
        if (nx, ny) != (p.x, p.y) and self.field.collides(nx, ny) and not self.field.collides(p.x, p.y):
            nx, ny, moved = p.x, p.y, False
            vx = vy = 0.0
        self.true_pose = Pose2D(nx, ny, p.psi + wz * cfg.dt)
        self.t = round(self.t + cfg.dt, 9)
        self.inject_drift(cfg.dt)
        self._log_trace(vx, vy, wz)
        return moved

    def wait(self, seconds: float) -> None:
        steps = int(round(seconds / self.config.dt))
        for _ in range(steps):
            self.step(0.0, 0.0, 0.0)

    def teleport_perceived(self, goal: Pose2D) -> None:
        """Place the robot so that its perceived pose equals ``goal``."""
        self.true_pose = self.to_true(goal)
        self._log_trace(0.0, 0.0, 0.0)

    # -- navigation ---------------------------------------------------
    def check_goal(self, goal: Pose2D) -> None:
        if not self.field.inside(goal.x, goal.y):
            raise OutOfMapError(f"goal ({goal.x:.3f}, {goal.y:.3f}) lies outside the map")

    def goto_pose(self, goal: Pose2D, tol: Tolerance, timeout: float | None = None,
                  via: Sequence[Sequence[float]] = (), interrupt_at: float | None = None) -> NavResult:
        """Turn toward each target, drive to it, then turn to the goal heading.

        ``via`` points are passed through without stopping. Returns
        ``timeout`` when ``timeout`` seconds elapse first, ``interrupted`` when
        the simulation clock reaches ``interrupt_at``.
        """
        self.check_goal(goal)
        cfg = self.config
        timeout = tol.timeout if timeout is None else timeout
        t0 = self.t
        targets = [tuple(map(float, v)) for v in via] + [goal.xy]
        k = 0
        phase = "turn"
        blocked = False
        while True:
            if interrupt_at is not None and self.t >= interrupt_at:
                return NavResult("interrupted", self.t - t0, blocked)
            p = self.perceived_pose
            if k == len(targets) - 1 and math.hypot(p.x - goal.x, p.y - goal.y) <= tol.position \
                    and abs(wrap_angle(goal.psi - p.psi)) <= 0.5 * tol.yaw:
                return NavResult("success", self.t - t0, blocked)
            if self.t - t0 >= timeout - 1e-9:
                return NavResult("timeout", self.t - t0, blocked)

            tx, ty = targets[k]
            final = k == len(targets) - 1
            dx, dy = tx - p.x, ty - p.y
            dist = math.hypot(dx, dy)
            vx = vy = wz = 0.0
            if phase != "align" and final and dist <= 0.5 * tol.position:
                phase = "align"
            if phase != "align" and not final and dist <= 0.15:
                k += 1
                continue
            if phase == "align":
                if dist > tol.position:
                    phase = "approach"
                else:
                    wz = cfg.k_ang * wrap_angle(goal.psi - p.psi)
            if phase in ("turn", "drive"):
                heading_err = wrap_angle(math.atan2(dy, dx) - p.psi)
                if final and dist < 0.3:
                    phase = "approach"
                elif phase == "turn":
                    wz = cfg.k_ang * heading_err
                    if abs(heading_err) < 0.05:
                        phase = "drive"
                else:
                    if abs(heading_err) > 0.5:
                        phase = "turn"
                        continue
                    speed = cfg.max_vx if not final else cfg.k_lin * dist
                    vx = speed * max(0.0, math.cos(heading_err))
                    wz = cfg.k_ang * heading_err
            if phase == "approach":
                c, s = math.cos(p.psi), math.sin(p.psi)
                ex, ey = c * dx + s * dy, -s * dx + c * dy
                vx, vy = cfg.k_lin * ex, cfg.k_lin * ey
                if dist <= 0.5 * tol.position:
                    phase = "align"
            if not self.step(vx, vy, wz):
                blocked = True

    # -- export -------------------------------------------------------
    def write_trace(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        lines = ["# t x y psi perceived_x perceived_y perceived_psi"]
        lines += [
            f"{r.t:.2f} {r.x:.6f} {r.y:.6f} {r.psi:.6f} {r.px:.6f} {r.py:.6f} {r.ppsi:.6f}"
            for r in self.trace
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


# ------------------------------------------------------------------ frames

@dataclass(frozen=True)
class BodyTransform:
    """Rotation (body w.r.t. inertial) and translation in meters."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))


def validate_rotation(rot: np.ndarray, tol: float = 1e-9) -> None:
    if not np.allclose(rot @ rot.T, np.eye(3), atol=tol) or abs(np.linalg.det(rot) - 1.0) > tol:
        raise ValueError("rotation must be orthonormal with determinant +1")


def project_base_footprint(tf: BodyTransform) -> BodyTransform:
    """Ground-projected footprint frame relative to the body frame.

    The footprint has no rotation relative to the inertial frame, so its
    rotation w.r.t. the body is the inverse body rotation, and its offset is
    that inverse applied to ``(0, 0, -z)``.
    """
    validate_rotation(tf.rotation)
    inv = tf.rotation.T
    return BodyTransform(inv, inv @ np.array([0.0, 0.0, -tf.translation[2]]))


def velocity_to_joystick(v: Sequence[float], w: Sequence[float], config: SimConfig = SimConfig()
                         ) -> tuple[float, float, float, float]:
    """Twist -> normalized (lx, ly, rx, ry) stick deflections.

    ly follows forward speed, lx the negated lateral speed, rx the negated
    yaw rate, each scaled by its velocity limit and kept strictly inside
    (-1, 1). ry is unused.
    """
    hi = math.nextafter(1.0, 0.0)
    ly = _clamp(v[0] / config.max_vx, hi)
    lx = _clamp(-v[1] / config.max_vy, hi)
    rx = _clamp(-w[2] / config.max_wz, hi)
    return (lx + 0.0, ly + 0.0, rx + 0.0, 0.0)
