"""Digital-twin wheelchair: 2-D kinematics, timed 90-degree turns, collisions.

Convention: heading in degrees, clockwise-positive from the +y axis, so
heading 0 moves toward +y and heading 90 toward +x. Turns snap exactly to
their target heading, so completed turns never drift.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .decoder import Command
from .signal_model import ValidationError


DEFAULT_SPEED_MPS = 0.5
DEFAULT_TURN_DURATION_S = 1.5
TURN_ANGLE_DEG = 90.0


class MotionMode:
    IDLE = "Idle"
    TRANSLATING = "Translating"
    TURNING = "Turning"


@dataclass(frozen=True)
class ChairParams:
    speed_mps: float = DEFAULT_SPEED_MPS
    turn_duration_s: float = DEFAULT_TURN_DURATION_S

    def __post_init__(self):
        if self.speed_mps <= 0 or self.turn_duration_s <= 0:
            raise ValidationError("chair speed and turn duration must be > 0")

    @property
    def turn_rate_dps(self) -> float:
        return TURN_ANGLE_DEG / self.turn_duration_s


@dataclass(frozen=True)
class Rect:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValidationError(f"degenerate rectangle {self}")


@dataclass(frozen=True)
class World:
    bounds: Rect
    obstacles: tuple[Rect, ...] = ()
    footprint_radius: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.footprint_radius <= 0:
            raise ValidationError("footprint radius must be > 0")
        b = self.bounds
        for o in self.obstacles:
            if o.x_min < b.x_min or o.y_min < b.y_min or o.x_max > b.x_max or o.y_max > b.y_max:
                raise ValidationError(f"obstacle {o} outside world bounds")

    def collides(self, x: float, y: float) -> bool:
        """Footprint circle out of bounds or overlapping any obstacle."""
        r = self.footprint_radius
        b = self.bounds
        if x - r < b.x_min or x + r > b.x_max or y - r < b.y_min or y + r > b.y_max:
            return True
        for o in self.obstacles:
            cx = min(max(x, o.x_min), o.x_max)
            cy = min(max(y, o.y_min), o.y_max)
            if (x - cx) ** 2 + (y - cy) ** 2 < r * r:
                return True
        return False

    def to_dict(self) -> dict:
        return {
            "bounds": [self.bounds.x_min, self.bounds.y_min,
                       self.bounds.x_max, self.bounds.y_max],
            "obstacles": [[o.x_min, o.y_min, o.x_max, o.y_max] for o in self.obstacles],
            "footprint_radius": self.footprint_radius,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "World":
        return cls(bounds=Rect(*doc["bounds"]),
                   obstacles=tuple(Rect(*o) for o in doc.get("obstacles", [])),
                   footprint_radius=doc.get("footprint_radius", 0.3))

    @classmethod
    def load(cls, path) -> "World":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def default_world() -> World:
    """Empty 10 m x 10 m room centered at the origin."""
    return World(bounds=Rect(-5.0, -5.0, 5.0, 5.0))


def _norm_heading(h: float) -> float:
    h = math.fmod(h, 360.0)
    return h + 360.0 if h < 0 else h


@dataclass(frozen=True)
class ChairState:
    x: float = 0.0
    y: float = 0.0
    heading_deg: float = 0.0
    velocity_mps: float = 0.0
    mode: str = MotionMode.IDLE
    turn_target_deg: float | None = None
    turn_direction: int = 0  # +1 clockwise (right), -1 counter-clockwise
    pending_turns: tuple[int, ...] = ()  # queued turn directions
    collided: bool = False

    def __post_init__(self):
        if not (0 <= self.heading_deg < 360):
            object.__setattr__(self, "heading_deg", _norm_heading(self.heading_deg))


def _start_turn(state: ChairState, direction: int) -> ChairState:
    target = _norm_heading(state.heading_deg + direction * TURN_ANGLE_DEG)
    return replace(state, mode=MotionMode.TURNING, velocity_mps=0.0,
                   turn_target_deg=target, turn_direction=direction, collided=False)


def apply_command(state: ChairState, command: Command,
                  params: ChairParams = ChairParams()) -> ChairState:
    """Apply a drive command; turn commands during a turn are queued."""
    if command == Command.STOP:
        return replace(state, mode=MotionMode.IDLE, velocity_mps=0.0,
                       turn_target_deg=None, turn_direction=0,
                       pending_turns=(), collided=False)
    if command == Command.FORWARD:
        if state.mode == MotionMode.TURNING:
            return state  # turn completes first; translation not queued
        return replace(state, mode=MotionMode.TRANSLATING,
                       velocity_mps=params.speed_mps, collided=False)
    if command == Command.BACKWARD:
        if state.mode == MotionMode.TURNING:
            return state
        return replace(state, mode=MotionMode.TRANSLATING,
                       velocity_mps=-params.speed_mps, collided=False)
    direction = 1 if command == Command.TURN_RIGHT else -1
    if state.mode == MotionMode.TURNING:
        return replace(state, pending_turns=state.pending_turns + (direction,))
    return _start_turn(state, direction)


def step(state: ChairState, world: World, dt_s: float,
         params: ChairParams = ChairParams()) -> ChairState:
    """Advance one integration step; collisions cancel motion and raise a flag."""
    if not (0 < dt_s <= 0.1):
        raise ValidationError(f"dt must be in (0, 0.1] s, got {dt_s}")

    if state.mode == MotionMode.TURNING:
        assert state.turn_target_deg is not None
        step_deg = params.turn_rate_dps * dt_s
        remaining = _norm_heading((state.turn_target_deg - state.heading_deg)
                                  * state.turn_direction)
        if remaining <= step_deg + 1e-12:
            state = replace(state, heading_deg=state.turn_target_deg,
                            mode=MotionMode.IDLE, turn_target_deg=None,
                            turn_direction=0)
            if state.pending_turns:
                nxt, rest = state.pending_turns[0], state.pending_turns[1:]
                state = replace(_start_turn(state, nxt), pending_turns=rest)
            return state
        return replace(state, heading_deg=_norm_heading(
            state.heading_deg + state.turn_direction * step_deg))

    if state.mode == MotionMode.TRANSLATING:
        h = math.radians(state.heading_deg)
        nx = state.x + state.velocity_mps * dt_s * math.sin(h)
        ny = state.y + state.velocity_mps * dt_s * math.cos(h)
        if world.collides(nx, ny):
            return replace(state, mode=MotionMode.IDLE, velocity_mps=0.0,
                           collided=True)
        return replace(state, x=nx, y=ny)

    return state


def telemetry(state: ChairState) -> dict:
    """Wire-ready snapshot of the chair state."""
    return {
        "x": state.x,
        "y": state.y,
        "heading_deg": state.heading_deg,
        "velocity_mps": state.velocity_mps,
        "mode": state.mode,
        "collided": state.collided,
    }
