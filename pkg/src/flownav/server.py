"""WebSocket bridge exposing the live control loop to the operator console.

The simulation steps on a wall clock at the control rate in a background
thread; each tick fans a frame event (PNG-encoded camera image) and a state
event out to every connected session through bounded per-session buffers
that drop the oldest frame first under backpressure.  Incoming messages --
lifecycle triggers, normalized override sticks, release -- are published
onto the topic bus, where the loop picks them up on its next tick, so an
override preempts autonomy within one control period.

Protocol (JSON text frames)
    server -> client: {"type": "frame", "seq", "t", "png"}
                      {"type": "state", "mode", "signal", "regions",
                       "pose", "battery", "proc_ms", "twist"}
                      {"type": "info", "text"}
    client -> server: {"type": "lifecycle", "action": takeoff|land|reset}
                      {"type": "override", "x", "y", "z", "yaw"}  in [-1, 1]
                      {"type": "release"}

Override axes are normalized; the server scales them by the command limits
so the console never encodes physical units.  Unknown or malformed client
messages are ignored with an info event.  When a session drops, a zero
override is injected so the vehicle holds position instead of continuing
on a stale command.
"""

from __future__ import annotations

import asyncio
import base64
import io
import json
import threading
import time
from collections import deque
from contextlib import asynccontextmanager
from typing import Deque, List, Optional, Set, Tuple

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from PIL import Image

from .bus import (
    FRAME_QUEUE_BOUND,
    TOPIC_LAND,
    TOPIC_OVERRIDE,
    TOPIC_RESET,
    TOPIC_TAKEOFF,
    Empty,
    Override,
)
from .harness import DT, RunConfig, Scenario, SimulationRun, TickRecord
from .pilot import ANGULAR_LIMIT, LINEAR_LIMIT, TwistCommand

__all__ = ["SimServer", "build_app", "serve"]

_LIFECYCLE_TOPICS = {
    "takeoff": TOPIC_TAKEOFF,
    "land": TOPIC_LAND,
    "reset": TOPIC_RESET,
}


def _png_b64(frame: np.ndarray) -> str:
    quantized = np.clip(np.rint(frame * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(quantized, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class _Session:
    """One client's outbound event buffer, fed from the sim thread.

    ``push`` is called off-loop; it wakes the session's sender coroutine
    via ``call_soon_threadsafe``.  The buffer is bounded: when full, the
    oldest pending frame event is dropped first (state and info events
    survive unless nothing else is left).
    """

    def __init__(self, loop: asyncio.AbstractEventLoop):
        self._loop = loop
        self._event = asyncio.Event()
        self._lock = threading.Lock()
        self._items: Deque[Tuple[str, str]] = deque()

    def push(self, kind: str, payload: str) -> None:
        with self._lock:
            if len(self._items) >= FRAME_QUEUE_BOUND:
                stale = next(
                    (i for i, item in enumerate(self._items) if item[0] == "frame"),
                    0,
                )
                del self._items[stale]
            self._items.append((kind, payload))
        try:
            self._loop.call_soon_threadsafe(self._event.set)
        except RuntimeError:
            pass  # session's loop already closed; it is being torn down

    def drain(self) -> List[str]:
        with self._lock:
            items = [payload for _, payload in self._items]
            self._items.clear()
        return items

    async def wait(self) -> None:
        await self._event.wait()
        self._event.clear()


class SimServer:
    """Shared state between the sim thread and the websocket sessions."""

    def __init__(self, scenario: Scenario, cfg: RunConfig):
        self.sim = SimulationRun(scenario, cfg, auto_takeoff=False)
        self._sessions: Set[_Session] = set()
        self._sessions_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._collision_reported = False
        self._goal_reported = False
        self._last_state = self._state_payload(None)

    # -- event payloads ------------------------------------------------------------------

    def _state_payload(self, record: Optional[TickRecord]) -> str:
        if record is None:
            mode, signal, pose = "grounded", 0, self.sim.pose
            regions = [0.0] * 5
            proc_ms = 0.0
            twist = [0.0, 0.0, 0.0, 0.0]
            battery = 100.0
        else:
            mode = record.mode.label()
            signal = record.signal
            pose = record.pose
            regions = ([round(float(v), 4) for v in record.report.region_stat]
                       if record.report is not None else [0.0] * 5)
            proc_ms = round(record.proc_ms, 2) if record.proc_ms is not None else 0.0
            twist = [round(v, 6) for v in (record.twist.linear_x,
                                           record.twist.linear_y,
                                           record.twist.linear_z,
                                           record.twist.angular_z)]
            battery = round(max(0.0, 100.0 - 0.05 * record.t), 2)
        return json.dumps({
            "type": "state",
            "mode": mode,
            "signal": signal,
            "regions": regions,
            "pose": {"x": round(pose.x, 4), "y": round(pose.y, 4),
                     "z": round(pose.z, 4), "yaw": round(pose.yaw, 4)},
            "battery": battery,
            "proc_ms": proc_ms,
            "twist": twist,
        }, separators=(",", ":"))

    def _frame_payload(self, record: TickRecord) -> str:
        return json.dumps({
            "type": "frame",
            "seq": self.sim.frame_seq - 1,
            "t": round(record.t, 6),
            "png": _png_b64(record.frame),
        }, separators=(",", ":"))

    @staticmethod
    def _info_payload(text: str) -> str:
        return json.dumps({"type": "info", "text": text}, separators=(",", ":"))

    # -- sim thread ----------------------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="sim-loop",
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    def _broadcast(self, kind: str, payload: str) -> None:
        with self._sessions_lock:
            sessions = list(self._sessions)
        for session in sessions:
            session.push(kind, payload)

    def _run(self) -> None:
        next_due = time.monotonic()
        while not self._stop.is_set():
            record = self.sim.tick()
            state = self._state_payload(record)
            self._last_state = state
            if record.frame is not None:
                self._broadcast("frame", self._frame_payload(record))
            self._broadcast("state", state)
            if self.sim.collided and not self._collision_reported:
                self._collision_reported = True
                self._broadcast("info", self._info_payload(
                    f"collision at t={record.t:.2f}s"))
            if self.sim.goal and not self._goal_reported:
                self._goal_reported = True
                self._broadcast("info", self._info_payload(
                    f"goal distance reached at t={record.t:.2f}s"))
            next_due += DT
            delay = next_due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                next_due = time.monotonic()  # fell behind; don't burst to catch up

    # -- session plumbing ----------------------------------------------------------------

    def register(self, session: _Session) -> None:
        session.push("state", self._last_state)
        with self._sessions_lock:
            self._sessions.add(session)

    def unregister(self, session: _Session) -> None:
        with self._sessions_lock:
            self._sessions.discard(session)
        # Hold position rather than flying on whatever the session last sent.
        self.sim.bus.publish(TOPIC_OVERRIDE,
                             Override(self.sim.t, TwistCommand()))

    def handle_client_message(self, text: str) -> Optional[str]:
        """Apply one inbound message; returns an info payload for bad input."""
        try:
            msg = json.loads(text)
        except json.JSONDecodeError:
            return self._info_payload("ignored: malformed JSON")
        if not isinstance(msg, dict):
            return self._info_payload("ignored: message must be an object")
        kind = msg.get("type")
        now = self.sim.t
        if kind == "lifecycle":
            topic = _LIFECYCLE_TOPICS.get(msg.get("action"))
            if topic is None:
                return self._info_payload(
                    f"ignored: unknown lifecycle action {msg.get('action')!r}")
            self.sim.bus.publish(topic, Empty(now))
            return None
        if kind == "override":
            try:
                axes = [float(msg.get(axis, 0.0)) for axis in ("x", "y", "z", "yaw")]
            except (TypeError, ValueError):
                return self._info_payload("ignored: override axes must be numbers")
            x, y, z, yaw = (max(-1.0, min(1.0, v)) for v in axes)
            twist = TwistCommand.clamp(x * LINEAR_LIMIT, y * LINEAR_LIMIT,
                                       z * LINEAR_LIMIT, yaw * ANGULAR_LIMIT)
            self.sim.bus.publish(TOPIC_OVERRIDE, Override(now, twist))
            return None
        if kind == "release":
            self.sim.bus.publish(TOPIC_OVERRIDE, Override(now, None))
            return None
        return self._info_payload(f"ignored: unknown message type {kind!r}")


def build_app(scenario: Scenario, cfg: RunConfig) -> FastAPI:
    """FastAPI application running the loop and the websocket endpoint."""
    server = SimServer(scenario, cfg)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        server.start()
        try:
            yield
        finally:
            server.stop()

    app = FastAPI(lifespan=lifespan)
    app.state.sim_server = server

    async def _send_events(websocket: WebSocket, session: _Session) -> None:
        try:
            while True:
                await session.wait()
                for payload in session.drain():
                    await websocket.send_text(payload)
        except (WebSocketDisconnect, RuntimeError):
            return  # socket closed under us; the receive loop handles teardown

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        session = _Session(asyncio.get_running_loop())
        server.register(session)
        sender = asyncio.create_task(_send_events(websocket, session))
        try:
            while True:
                text = await websocket.receive_text()
                reply = server.handle_client_message(text)
                if reply is not None:
                    await websocket.send_text(reply)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            server.unregister(session)

    return app


def serve(port: int, scenario: Scenario, cfg: RunConfig,
          host: str = "127.0.0.1") -> None:
    """Run the loop and the websocket endpoint until interrupted."""
    import uvicorn

    uvicorn.run(build_app(scenario, cfg), host=host, port=port,
                log_level="warning")
