"""Reactive avoidance state machine.

The controller cycles takeoff -> detect -> fly forward, sidesteps away from
a reported obstacle for a fixed duration, then re-checks before resuming
forward flight.  A joystick override preempts everything and holds the
vehicle in manual hover until released.  The machine is a pure function of
(mode, inputs), so a recorded input trace replays to an identical command
trace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

from .detector import DetectionSignal

__all__ = [
    "LINEAR_LIMIT",
    "ANGULAR_LIMIT",
    "FlightMode",
    "TwistCommand",
    "ZERO_TWIST",
    "PilotConfig",
    "NavEstimate",
    "GROUNDED",
    "TAKING_OFF",
    "DETECTING",
    "FLYING_FORWARD",
    "LANDING",
    "sideways",
    "hovering",
    "step",
    "dead_reckon",
    "lifecycle",
    "trace_line",
]

LINEAR_LIMIT = 2.0
"""Maximum magnitude of any linear velocity component, m/s."""

ANGULAR_LIMIT = 1.5
"""Maximum magnitude of the yaw-rate component, rad/s."""

_KINDS = frozenset(
    {"grounded", "taking_off", "detecting", "flying_forward", "sideways",
     "hovering", "landing"}
)
_LANDED_EPS = 0.01  # altitude below which Landing completes, m


@dataclass(frozen=True)
class FlightMode:
    """One state of the avoidance machine.

    Parameters
    ----------
    kind:
        One of ``grounded``, ``taking_off``, ``detecting``,
        ``flying_forward``, ``sideways``, ``hovering``, ``landing``.
    direction:
        Sideways only: ``"left"`` or ``"right"`` (the direction flown,
        i.e. away from the obstacle).
    elapsed:
        Sideways only: seconds already spent in the maneuver.
    reason:
        Hovering only: ``"override"`` (manual control) or ``"waiting"``
        (holding position at the goal).
    """

    kind: str
    direction: Optional[str] = None
    elapsed: float = 0.0
    reason: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown flight mode kind: {self.kind!r}")
        if self.kind == "sideways":
            if self.direction not in ("left", "right"):
                raise ValueError("sideways mode needs direction left|right")
            if self.elapsed < 0.0:
                raise ValueError("sideways elapsed must be >= 0")
        elif self.direction is not None or self.elapsed != 0.0:
            raise ValueError("direction/elapsed only apply to sideways")
        if self.kind == "hovering":
            if self.reason not in ("override", "waiting"):
                raise ValueError("hovering mode needs reason override|waiting")
        elif self.reason is not None:
            raise ValueError("reason only applies to hovering")

    @property
    def airborne(self) -> bool:
        """True in every mode except ``grounded``."""
        return self.kind != "grounded"

    def label(self) -> str:
        """Compact display string, e.g. ``sideways:left``."""
        if self.kind == "sideways":
            return f"sideways:{self.direction}"
        if self.kind == "hovering":
            return f"hovering:{self.reason}"
        return self.kind


GROUNDED = FlightMode("grounded")
TAKING_OFF = FlightMode("taking_off")
DETECTING = FlightMode("detecting")
FLYING_FORWARD = FlightMode("flying_forward")
LANDING = FlightMode("landing")


def sideways(direction: str, elapsed: float = 0.0) -> FlightMode:
    """Sideways-maneuver mode flying toward ``direction``."""
    return FlightMode("sideways", direction=direction, elapsed=elapsed)


def hovering(reason: str) -> FlightMode:
    """Hovering mode with the given reason (``override`` or ``waiting``)."""
    return FlightMode("hovering", reason=reason)


@dataclass(frozen=True)
class TwistCommand:
    """Open-loop velocity setpoint: body-frame linear m/s plus yaw rad/s."""

    linear_x: float = 0.0
    linear_y: float = 0.0
    linear_z: float = 0.0
    angular_z: float = 0.0

    def __post_init__(self) -> None:
        for name in ("linear_x", "linear_y", "linear_z"):
            if abs(getattr(self, name)) > LINEAR_LIMIT:
                raise ValueError(f"|{name}| exceeds {LINEAR_LIMIT} m/s")
        if abs(self.angular_z) > ANGULAR_LIMIT:
            raise ValueError(f"|angular_z| exceeds {ANGULAR_LIMIT} rad/s")

    @staticmethod
    def clamp(linear_x: float = 0.0, linear_y: float = 0.0,
              linear_z: float = 0.0, angular_z: float = 0.0) -> "TwistCommand":
        """Build a command with each component clamped into its limit."""
        lim = LINEAR_LIMIT

        def cut(v: float, m: float) -> float:
            return min(max(float(v), -m), m)

        return TwistCommand(cut(linear_x, lim), cut(linear_y, lim),
                            cut(linear_z, lim), cut(angular_z, ANGULAR_LIMIT))

    def as_list(self) -> list:
        return [self.linear_x, self.linear_y, self.linear_z, self.angular_z]


ZERO_TWIST = TwistCommand()


@dataclass(frozen=True)
class PilotConfig:
    """Controller constants.

    Forward speed 1 m/s and a 1.2 m/s sidestep held for 1 s displace the
    vehicle 1.2 m laterally per avoidance — enough to clear a meter-wide
    obstacle.  ``hover_at_goal`` selects holding position at the goal
    instead of landing.
    """

    v_forward: float = 1.0
    v_side: float = 1.2
    side_duration: float = 1.0
    goal_distance: float = 20.0
    takeoff_altitude: float = 1.5
    control_rate: float = 15.0
    hover_at_goal: bool = False

    def __post_init__(self) -> None:
        for name in ("v_forward", "v_side", "side_duration", "goal_distance",
                     "takeoff_altitude", "control_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 1.0 <= self.takeoff_altitude <= 4.0:
            raise ValueError("takeoff_altitude must lie in [1, 4] m")
        if max(self.v_forward, self.v_side) > LINEAR_LIMIT:
            raise ValueError(f"speeds must not exceed {LINEAR_LIMIT} m/s")


@dataclass(frozen=True)
class NavEstimate:
    """Dead-reckoned position plus accumulated forward distance."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    traveled_forward: float = 0.0
    t: float = 0.0


def dead_reckon(nav: NavEstimate, cmd: TwistCommand, dt: float) -> NavEstimate:
    """Integrate a commanded twist into the position estimate.

    Yaw is fixed at zero (the controller never commands turns), so body
    and world axes coincide.  Only positive forward velocity accrues
    ``traveled_forward``.

    Parameters
    ----------
    nav:
        Estimate before the tick.
    cmd:
        Twist held during the tick.
    dt:
        Tick length in seconds, > 0.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    return NavEstimate(
        x=nav.x + cmd.linear_x * dt,
        y=nav.y + cmd.linear_y * dt,
        z=nav.z + cmd.linear_z * dt,
        traveled_forward=nav.traveled_forward + max(0.0, cmd.linear_x) * dt,
        t=nav.t + dt,
    )


def lifecycle(action: str, mode: FlightMode) -> FlightMode:
    """Apply a takeoff/land/reset request to the current mode.

    Takeoff only acts from the ground (repeat requests while airborne are
    ignored); land pulls any airborne mode into ``landing``; reset forces
    ``grounded`` and discards all accumulated state.
    """
    if action == "takeoff":
        return TAKING_OFF if mode.kind == "grounded" else mode
    if action == "land":
        return LANDING if mode.airborne else mode
    if action == "reset":
        return GROUNDED
    raise ValueError(f"unknown lifecycle action: {action!r}")


def _signal_value(signal: Union[DetectionSignal, int]) -> int:
    if isinstance(signal, DetectionSignal):
        return signal.value
    return int(signal)


def step(
    mode: FlightMode,
    signal: Union[DetectionSignal, int],
    nav: NavEstimate,
    override: Optional[TwistCommand],
    dt: float,
    cfg: PilotConfig,
) -> "tuple[FlightMode, TwistCommand]":
    """Advance the machine one control tick.

    Priority order: a present override always wins (manual hover/steer,
    applied the same tick it arrives); otherwise the mode's own rule fires.
    A nonzero detection signal while detecting or flying forward starts a
    sidestep away from the obstacle: signal +1 means the obstacle is on the
    right, so the vehicle flies left (negative linear_y).  The sidestep
    ignores further signals, runs ``side_duration`` (within one tick), and
    always hands back to ``detecting`` before forward flight resumes.

    Parameters
    ----------
    mode:
        Mode entering the tick.
    signal:
        Latest detector output (-1, 0, +1), as a value or ``DetectionSignal``.
    nav:
        Current navigation estimate (altitude gates takeoff, forward
        distance gates the goal).
    override:
        Manual twist if the operator holds control, else None.
    dt:
        Tick length in seconds, > 0.
    cfg:
        Controller constants.

    Returns
    -------
    (FlightMode, TwistCommand)
        Mode after the tick and the command to hold during it.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")

    if override is not None:
        return hovering("override"), TwistCommand.clamp(*override.as_list())

    kind = mode.kind
    if kind == "grounded":
        return mode, ZERO_TWIST
    if kind == "taking_off":
        if nav.z >= cfg.takeoff_altitude:
            return DETECTING, ZERO_TWIST
        return mode, ZERO_TWIST
    if kind == "landing":
        if nav.z <= _LANDED_EPS:
            return GROUNDED, ZERO_TWIST
        return mode, ZERO_TWIST
    if kind == "hovering":
        if mode.reason == "override":
            # Operator released control: re-check for obstacles before moving.
            return DETECTING, ZERO_TWIST
        return mode, ZERO_TWIST
    if kind == "sideways":
        remaining = cfg.side_duration - mode.elapsed
        if remaining > dt / 2:
            vy = -cfg.v_side if mode.direction == "left" else cfg.v_side
            return (sideways(mode.direction, mode.elapsed + dt),
                    TwistCommand(linear_y=vy))
        return DETECTING, ZERO_TWIST

    # detecting / flying_forward
    if kind == "flying_forward" and nav.traveled_forward >= cfg.goal_distance:
        if cfg.hover_at_goal:
            return hovering("waiting"), ZERO_TWIST
        return LANDING, ZERO_TWIST
    value = _signal_value(signal)
    if value != 0:
        direction = "left" if value > 0 else "right"
        vy = -cfg.v_side if direction == "left" else cfg.v_side
        return sideways(direction, dt), TwistCommand(linear_y=vy)
    return FLYING_FORWARD, TwistCommand(linear_x=cfg.v_forward)


def trace_line(
    t: float,
    mode: FlightMode,
    signal: Union[DetectionSignal, int],
    twist: TwistCommand,
) -> str:
    """One command-trace record as a JSON line (no trailing newline)."""
    record = {
        "t": round(float(t), 6),
        "mode": mode.label(),
        "signal": _signal_value(signal),
        "twist": [round(v, 6) for v in twist.as_list()],
    }
    return json.dumps(record, separators=(",", ":"))
