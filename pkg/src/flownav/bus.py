"""In-process topic bus with real-time and fixed-rate delivery.

Emulates the driver's topic layer: named topics carry empty lifecycle
triggers, twist setpoints, navdata, camera frames, detection signals, and
operator overrides.  Real-time topics deliver synchronously on publish;
fixed-rate topics store the most recent value and re-emit it when a
simulated-clock pump says the interval has elapsed (15 Hz for navdata and
detection signals).  Publish and subscribe are thread-safe; the pump is
driven by the single clock owner.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from typing import Dict, List, Optional, Union

import numpy as np

from .detector import DetectionSignal
from .pilot import TwistCommand

__all__ = [
    "TOPIC_TAKEOFF",
    "TOPIC_LAND",
    "TOPIC_RESET",
    "TOPIC_CMD_VEL",
    "TOPIC_NAVDATA",
    "TOPIC_FRONT_IMAGE",
    "TOPIC_SIGNAL",
    "TOPIC_OVERRIDE",
    "FRAME_QUEUE_BOUND",
    "Empty",
    "Twist",
    "Nav",
    "Frame",
    "Signal",
    "Override",
    "BusMessage",
    "NavData",
    "RealTime",
    "FixedRate",
    "Subscription",
    "Bus",
]

TOPIC_TAKEOFF = "ardrone/takeoff"
TOPIC_LAND = "ardrone/land"
TOPIC_RESET = "ardrone/reset"
TOPIC_CMD_VEL = "cmd_vel"
TOPIC_NAVDATA = "ardrone/navdata"
TOPIC_FRONT_IMAGE = "ardrone/front/image_raw"
TOPIC_SIGNAL = "detector/signal"
TOPIC_OVERRIDE = "joystick/override"

FRAME_QUEUE_BOUND = 64
"""Pending camera frames per subscriber; overflow drops the oldest frame."""

_RATE_TOL = 1e-9  # clock slack so accumulated tick sums still count as due

# Topics that default to fixed-rate delivery when auto-created.
_DEFAULT_RATES = {TOPIC_NAVDATA: 15.0, TOPIC_SIGNAL: 15.0}


@dataclass(frozen=True)
class Empty:
    """Payload-free trigger (takeoff/land/reset)."""

    t: float


@dataclass(frozen=True)
class Twist:
    """Velocity setpoint."""

    t: float
    twist: TwistCommand


@dataclass(frozen=True)
class NavData:
    """Periodic vehicle status."""

    state: str
    yaw: float
    pitch: float
    roll: float
    altitude: float
    battery: float
    timestamp: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.battery <= 100.0:
            raise ValueError("battery must lie in [0, 100]")
        if self.altitude < 0.0:
            raise ValueError("altitude must be >= 0")


@dataclass(frozen=True)
class Nav:
    """Navdata message."""

    t: float
    nav: NavData


@dataclass(frozen=True, eq=False)
class Frame:
    """Camera frame with sequence number."""

    t: float
    seq: int
    image: np.ndarray


@dataclass(frozen=True)
class Signal:
    """Detector output."""

    t: float
    signal: DetectionSignal


@dataclass(frozen=True)
class Override:
    """Operator twist; ``twist=None`` releases control back to autonomy."""

    t: float
    twist: Optional[TwistCommand]


BusMessage = Union[Empty, Twist, Nav, Frame, Signal, Override]


@dataclass(frozen=True)
class RealTime:
    """Deliver each publish synchronously to all subscribers."""


@dataclass(frozen=True)
class FixedRate:
    """Store the latest value; the pump re-emits it every ``1/hz`` seconds."""

    hz: float

    def __post_init__(self) -> None:
        if self.hz <= 0:
            raise ValueError("hz must be positive")


def _check_topic(path: str) -> str:
    segments = path.split("/")
    if not path or not all(segments):
        raise ValueError(f"invalid topic name: {path!r}")
    return path


class Subscription:
    """Handle yielding the messages delivered since subscription.

    Iterating drains currently pending messages without blocking;
    :meth:`wait` blocks until something is pending or the timeout passes.
    """

    def __init__(self, bus: "Bus", topic: str) -> None:
        self._bus = bus
        self.topic = topic
        self._pending: "List[BusMessage]" = []
        self._frames_pending = 0
        self._cond = threading.Condition()
        self._open = True

    def _deliver(self, msg: BusMessage) -> None:
        with self._cond:
            if not self._open:
                return
            if isinstance(msg, Frame):
                if self._frames_pending >= FRAME_QUEUE_BOUND:
                    for i, old in enumerate(self._pending):
                        if isinstance(old, Frame):
                            del self._pending[i]
                            self._frames_pending -= 1
                            break
                self._frames_pending += 1
            self._pending.append(msg)
            self._cond.notify_all()

    def drain(self) -> "List[BusMessage]":
        """Remove and return every pending message, oldest first."""
        with self._cond:
            out = self._pending
            self._pending = []
            self._frames_pending = 0
            return out

    def wait(self, timeout: Optional[float] = None) -> bool:
        """Block until a message is pending; True if one is."""
        with self._cond:
            if not self._pending:
                self._cond.wait(timeout)
            return bool(self._pending)

    def __iter__(self):
        yield from self.drain()

    def unsubscribe(self) -> None:
        """Stop delivery; already-pending messages stay drainable."""
        with self._cond:
            self._open = False
        self._bus._drop(self)


class _Topic:
    __slots__ = ("mode", "subscribers", "latest", "next_due", "count", "last_t")

    def __init__(self, mode) -> None:
        self.mode = mode
        self.subscribers: List[Subscription] = []
        self.latest: Optional[BusMessage] = None
        self.next_due: Optional[float] = None
        self.count = 0
        self.last_t: Optional[float] = None


class Bus:
    """Named-topic publish/subscribe hub driven by simulated time."""

    def __init__(self) -> None:
        self._topics: Dict[str, _Topic] = {}
        self._lock = threading.RLock()
        self._last_pump: Optional[float] = None

    def _topic(self, path: str) -> _Topic:
        path = _check_topic(path)
        topic = self._topics.get(path)
        if topic is None:
            rate = _DEFAULT_RATES.get(path)
            mode = FixedRate(rate) if rate is not None else RealTime()
            topic = self._topics[path] = _Topic(mode)
        return topic

    def declare(self, path: str, mode: Union[RealTime, FixedRate]) -> None:
        """Fix a topic's delivery mode before (or at) first use."""
        with self._lock:
            topic = self._topics.get(_check_topic(path))
            if topic is None:
                self._topics[path] = _Topic(mode)
            elif topic.count == 0 and topic.latest is None:
                topic.mode = mode
            elif topic.mode != mode:
                raise ValueError(f"topic {path!r} already active as {topic.mode}")

    def publish(self, path: str, msg: BusMessage) -> None:
        """Send ``msg``; delivery depends on the topic's mode.

        Real-time topics hand the message to every current subscriber in
        subscription order before returning.  Fixed-rate topics only record
        it as the latest value for the pump.  Publish timestamps on one
        topic must not regress.
        """
        with self._lock:
            topic = self._topic(path)
            t = float(msg.t)
            if topic.last_t is not None and t < topic.last_t - 1e-12:
                raise ValueError(f"timestamp regression on {path!r}")
            topic.last_t = t
            topic.count += 1
            if isinstance(topic.mode, FixedRate):
                topic.latest = msg
                return
            subscribers = list(topic.subscribers)
        for sub in subscribers:
            sub._deliver(msg)

    def subscribe(self, path: str) -> Subscription:
        """Attach a new subscriber; it sees only messages published later."""
        with self._lock:
            topic = self._topic(path)
            sub = Subscription(self, path)
            topic.subscribers.append(sub)
            return sub

    def _drop(self, sub: Subscription) -> None:
        with self._lock:
            topic = self._topics.get(sub.topic)
            if topic is not None and sub in topic.subscribers:
                topic.subscribers.remove(sub)

    def pump(self, now: float) -> None:
        """Emit due fixed-rate topics at simulated time ``now``.

        Each fixed-rate topic with a stored value emits it when at least
        ``1/hz`` has passed since its previous emission (the first pump
        after a value arrives emits immediately).  ``now`` must never
        regress across calls.
        """
        now = float(now)
        deliveries = []
        with self._lock:
            if self._last_pump is not None and now < self._last_pump - 1e-12:
                raise ValueError("pump time regression")
            self._last_pump = now
            for topic in self._topics.values():
                mode = topic.mode
                if not isinstance(mode, FixedRate) or topic.latest is None:
                    continue
                if topic.next_due is not None and now < topic.next_due - _RATE_TOL:
                    continue
                period = 1.0 / mode.hz
                base = topic.next_due if topic.next_due is not None else now
                topic.next_due = base + period
                if topic.next_due <= now:
                    topic.next_due = now + period
                deliveries.append((list(topic.subscribers), topic.latest))
        for subscribers, msg in deliveries:
            for sub in subscribers:
                sub._deliver(msg)

    def introspect(self) -> str:
        """Topic table (mode, subscriber count, publish count) as JSON."""
        with self._lock:
            table = {}
            for path in sorted(self._topics):
                topic = self._topics[path]
                if isinstance(topic.mode, FixedRate):
                    mode = f"fixed@{topic.mode.hz:g}"
                else:
                    mode = "realtime"
                table[path] = {
                    "mode": mode,
                    "subscribers": len(topic.subscribers),
                    "messages": topic.count,
                }
        return json.dumps(table, separators=(",", ":"))
