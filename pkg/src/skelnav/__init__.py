"""Skeleton-based waypoint extraction, coverage planning and mission simulation for mobile robots."""

from .graph import NoPathError, WaypointGraph, build_graph, find_leaves, shortest_path
from .map_io import MapError, OccupancyGrid, load_map, save_map
from .map_reader import EmptyMapError, ReaderParams, WaypointSet, read_map
from .navigator import MissionConfig, NavigationFSM, NavState, ScanParams, run_mission
from .planner import PlannedPath, PlannerParams, plan, splice
from .pose import Pose2D, Tolerance
from .sim import SimConfig, World, project_base_footprint, velocity_to_joystick
from .synthetic import generate_synthetic_map

__version__ = "0.1.0"

__all__ = [
    "EmptyMapError", "MapError", "MissionConfig", "NavState", "NavigationFSM", "NoPathError",
    "OccupancyGrid", "PlannedPath", "PlannerParams", "Pose2D", "ReaderParams", "ScanParams",
    "SimConfig", "Tolerance", "WaypointGraph", "WaypointSet", "World", "build_graph",
    "find_leaves", "generate_synthetic_map", "load_map", "plan", "project_base_footprint",
    "read_map", "run_mission", "save_map", "shortest_path", "splice", "velocity_to_joystick",
]
