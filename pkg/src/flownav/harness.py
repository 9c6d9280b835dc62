"""Offline replay, headless closed-loop simulation, and run metrics.

Three run modes share one vocabulary.  ``run_replay`` drives the detector
over a directory of recorded frames and emits one telemetry record per
frame pair.  ``run_sim`` closes the loop around the software renderer at
15 Hz -- render, detect, steer, publish over the bus, integrate dynamics --
and scores the episode against scene ground truth.  ``serve`` (in
:mod:`flownav.server`) exposes the same loop to the operator console over
a WebSocket.

Telemetry is JSON-lines; summary metrics serialize to a stable JSON
document.  Wall-clock processing times are measured and reported on the
:class:`Metrics` object but deliberately kept out of both files, so
repeated runs with the same inputs produce byte-identical output.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace
from typing import IO, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .bus import (
    TOPIC_CMD_VEL,
    TOPIC_FRONT_IMAGE,
    TOPIC_LAND,
    TOPIC_NAVDATA,
    TOPIC_OVERRIDE,
    TOPIC_RESET,
    TOPIC_SIGNAL,
    TOPIC_TAKEOFF,
    Bus,
    Empty,
    Frame,
    Nav,
    NavData,
    Signal,
    Twist,
)
from .detector import DetectionSignal, DetectorConfig, DetectorState, RegionReport, detect
from .flow import FlowParams
from .pilot import (
    GROUNDED,
    FlightMode,
    NavEstimate,
    PilotConfig,
    TwistCommand,
    dead_reckon,
    lifecycle,
    step,
    trace_line,
)
from .simworld import (
    CameraModel,
    DynamicsConfig,
    Obstacle,
    Pose,
    WindParams,
    WindState,
    World,
    ground_truth,
    mirror_world,
    read_image,
    render,
    step_dynamics,
    write_pgm,
)

__all__ = [
    "TICK_RATE",
    "DT",
    "EVAL_CORRIDOR_WIDTH",
    "EVAL_HORIZON",
    "EXIT_OK",
    "EXIT_ERROR",
    "EXIT_COLLISION",
    "HarnessError",
    "RunConfig",
    "Metrics",
    "Scenario",
    "load_run_config",
    "load_scenario",
    "scenario_from_dict",
    "mirror_scenario",
    "metrics_json",
    "write_metrics",
    "run_replay",
    "SimulationRun",
    "TickRecord",
    "run_sim",
    "exit_code_for",
]

TICK_RATE = 15.0
"""Control loop frequency (Hz): one render/detect/steer cycle per tick."""

DT = 1.0 / TICK_RATE

EVAL_CORRIDOR_WIDTH = 3.0
"""Scoring corridor width (m) for lead/false-positive bookkeeping.

Wider than the vehicle's swept path on purpose: wind drift of a meter or
so must not reclassify an honest detection as a false positive.  Collision
accounting is unaffected -- it uses exact distance to obstacle surfaces.
"""

EVAL_HORIZON = 20.0
"""Scoring look-ahead distance (m) for the same bookkeeping."""

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_COLLISION = 2

_VISION_AIRBORNE_Z = 0.05
"""Render frames only above this altitude (camera sees nothing on the skids)."""

_VISION_MODES = ("detecting", "flying_forward", "sideways", "hovering")
"""Modes whose frames feed the detector.

Frames rendered while climbing or descending stream to the console but are
not detected on: vertical motion produces radial flow that has nothing to
do with obstacles ahead, and feeding it to the detector would trip the
magnitude gate spuriously.
"""


class HarnessError(Exception):
    """A run could not proceed: bad inputs, unreadable frames, parse errors."""


# --- configuration ----------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs besides the scene itself.

    ``mode`` selects which path fields are mandatory: replay needs
    ``frames_path``; sim and serve need ``scenario_path``.  Output paths
    are optional everywhere (``None`` means stdout for telemetry, no file
    for metrics).
    """

    mode: str = "sim"
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    flow: FlowParams = field(default_factory=FlowParams)
    pilot: PilotConfig = field(default_factory=PilotConfig)
    frames_path: Optional[str] = None
    scenario_path: Optional[str] = None
    metrics_path: Optional[str] = None
    telemetry_path: Optional[str] = None
    dump_frames_path: Optional[str] = None
    port: int = 8080

    def __post_init__(self) -> None:
        if self.mode not in ("replay", "sim", "serve"):
            raise ValueError(f"unknown run mode: {self.mode!r}")
        if self.mode == "replay" and not self.frames_path:
            raise ValueError("replay mode requires frames_path")
        if self.mode in ("sim", "serve") and not self.scenario_path:
            raise ValueError(f"{self.mode} mode requires scenario_path")
        if not 0 < self.port < 65536:
            raise ValueError("port must lie in (0, 65536)")


def load_run_config(
    config_path: Optional[str],
    mode: str,
    **paths: Optional[str],
) -> RunConfig:
    """Build a :class:`RunConfig` from an optional JSON config file.

    The file may carry ``detector``, ``flow``, ``pilot``, and ``dynamics``
    objects whose keys override the corresponding dataclass defaults.
    Unknown sections or keys are errors, not silent no-ops.
    """
    raw: dict = {}
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise HarnessError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise HarnessError(f"config parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise HarnessError("config must be a JSON object")
    known = {"detector", "flow", "pilot"}
    unknown = set(raw) - known
    if unknown:
        raise HarnessError(f"unknown config sections: {sorted(unknown)}")
    try:
        detector = DetectorConfig(**raw.get("detector", {}))
        flow = FlowParams(**raw.get("flow", {}))
        pilot = PilotConfig(**raw.get("pilot", {}))
    except (TypeError, ValueError) as exc:
        raise HarnessError(f"bad config value: {exc}") from exc
    try:
        return RunConfig(mode=mode, detector=detector, flow=flow, pilot=pilot, **paths)
    except (TypeError, ValueError) as exc:
        raise HarnessError(f"bad run configuration: {exc}") from exc


# --- metrics ----------------------------------------------------------------------------


@dataclass
class Metrics:
    """Per-run summary counters and distances.

    ``lead_distance_m`` is the ground-truth distance to the obstacle at the
    first correct nonzero signal (``None`` if none fired).
    ``false_positive_frames`` counts nonzero signals emitted while no
    obstacle sat in the scoring corridor.  ``min_clearance_m`` is ``None``
    for scenes without obstacles.  ``mean_proc_ms``/``p95_proc_ms`` are
    wall-clock measurements and are excluded from the serialized form.
    """

    frames_processed: int = 0
    mean_proc_ms: Optional[float] = None
    p95_proc_ms: Optional[float] = None
    signals_emitted: int = 0
    lead_distance_m: Optional[float] = None
    false_positive_frames: int = 0
    collisions: int = 0
    min_clearance_m: Optional[float] = None
    goal_reached: bool = False

    def __post_init__(self) -> None:
        if min(self.frames_processed, self.signals_emitted,
               self.false_positive_frames, self.collisions) < 0:
            raise ValueError("metric counts must be >= 0")

    def to_dict(self, include_timing: bool = False) -> dict:
        """Stable-order plain dict; timing only on request."""
        out: dict = {"frames_processed": self.frames_processed}
        if include_timing:
            out["mean_proc_ms"] = self.mean_proc_ms
            out["p95_proc_ms"] = self.p95_proc_ms
        out.update(
            signals_emitted=self.signals_emitted,
            lead_distance_m=self.lead_distance_m,
            false_positive_frames=self.false_positive_frames,
            collisions=self.collisions,
            min_clearance_m=self.min_clearance_m,
            goal_reached=self.goal_reached,
        )
        return out


def metrics_json(metrics: Metrics) -> str:
    """Deterministic serialized form (no wall-clock fields)."""
    return json.dumps(metrics.to_dict(), indent=2) + "\n"


def write_metrics(metrics: Metrics, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(metrics_json(metrics))


def _timing_stats(samples: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    if not samples:
        return None, None
    arr = np.asarray(samples, dtype=np.float64)
    return float(arr.mean()), float(np.percentile(arr, 95.0))


# --- scenarios --------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """A seeded episode: scene, camera, controller overrides, time budget."""

    seed: int = 0
    world: World = field(default_factory=World)
    camera: CameraModel = field(default_factory=CameraModel)
    pilot_overrides: Mapping[str, float] = field(default_factory=dict)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    timeout_s: float = 120.0

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")

    def pilot_config(self, base: PilotConfig) -> PilotConfig:
        """The base controller config with this scenario's overrides applied."""
        try:
            return replace(base, **dict(self.pilot_overrides))
        except (TypeError, ValueError) as exc:
            raise HarnessError(f"bad pilot override: {exc}") from exc


def scenario_from_dict(raw: dict) -> Scenario:
    """Parse the scenario JSON object; unknown keys are errors."""
    if not isinstance(raw, dict):
        raise HarnessError("scenario must be a JSON object")
    known = {"seed", "timeout_s", "ground_texture_seed", "sky_value", "wind",
             "obstacles", "camera", "pilot", "dynamics", "goal_distance"}
    unknown = set(raw) - known
    if unknown:
        raise HarnessError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        wind = WindParams(**raw.get("wind", {}))
        obstacles = tuple(
            Obstacle(
                center_x=float(o["x"]),
                center_y=float(o["y"]),
                radius=float(o["radius"]),
                height=float(o["height"]),
                texture_contrast=float(o.get("contrast", 0.8)),
            )
            for o in raw.get("obstacles", ())
        )
        world = World(
            obstacles=obstacles,
            ground_texture_seed=int(raw.get("ground_texture_seed", 0)),
            sky_value=float(raw.get("sky_value", 0.85)),
            wind=wind,
        )
        camera = CameraModel(**raw.get("camera", {}))
        dynamics = DynamicsConfig(**raw.get("dynamics", {}))
        pilot = dict(raw.get("pilot", {}))
        if "goal_distance" in raw:
            pilot.setdefault("goal_distance", float(raw["goal_distance"]))
        return Scenario(
            seed=int(raw.get("seed", 0)),
            world=world,
            camera=camera,
            pilot_overrides=pilot,
            dynamics=dynamics,
            timeout_s=float(raw.get("timeout_s", 120.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise HarnessError(f"bad scenario value: {exc}") from exc


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise HarnessError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise HarnessError(f"scenario parse error: {exc}") from exc
    return scenario_from_dict(raw)


def mirror_scenario(scenario: Scenario) -> Scenario:
    """The same episode reflected about y=0 (scene, texture, and gusts)."""
    return replace(scenario, world=mirror_world(scenario.world))


# --- telemetry sinks --------------------------------------------------------------------


class _Sink:
    """Line sink that owns a file when given a path, else borrows stdout."""

    def __init__(self, path: Optional[str]):
        self._own = path is not None
        self._fh: IO[str] = open(path, "w", encoding="utf-8") if path else sys.stdout

    def write_line(self, line: str) -> None:
        self._fh.write(line + "\n")

    def close(self) -> None:
        if self._own:
            self._fh.close()


# --- offline replay ---------------------------------------------------------------------

_FRAME_SUFFIXES = (".pgm", ".png")


def _load_frames(frames_dir: str) -> List[Tuple[str, np.ndarray]]:
    try:
        names = sorted(
            n for n in os.listdir(frames_dir)
            if n.lower().endswith(_FRAME_SUFFIXES)
        )
    except OSError as exc:
        raise HarnessError(f"cannot list frames: {exc}") from exc
    if len(names) < 2:
        raise HarnessError(
            f"need at least 2 frames in {frames_dir}, found {len(names)}")
    frames: List[Tuple[str, np.ndarray]] = []
    for name in names:
        path = os.path.join(frames_dir, name)
        try:
            frames.append((name, read_image(path)))
        except Exception as exc:
            raise HarnessError(f"unreadable frame {name}: {exc}") from exc
    return frames


def _replay_record(seq: int, report: RegionReport, signal: DetectionSignal) -> str:
    record = {
        "seq": seq,
        "regions": [round(float(v), 4) for v in report.region_stat],
        "argmax": int(report.argmax_region),
        "kept": int(report.region_count.sum()),
        "signal": signal.value,
    }
    return json.dumps(record, separators=(",", ":"))


def run_replay(frames_dir: str, cfg: RunConfig) -> Metrics:
    """Run the detector over consecutive frame pairs from a directory.

    Frames are consumed in lexicographic filename order; no controller or
    simulator is involved.  One telemetry line per frame pair goes to
    ``cfg.telemetry_path`` (stdout when unset).
    """
    frames = _load_frames(frames_dir)
    state = DetectorState(cfg.detector)
    sink = _Sink(cfg.telemetry_path)
    proc_ms: List[float] = []
    signals = 0
    try:
        for seq in range(1, len(frames)):
            began = time.perf_counter()
            signal, report, _ = detect(
                frames[seq - 1][1], frames[seq][1], state, cfg.detector, cfg.flow)
            proc_ms.append((time.perf_counter() - began) * 1e3)
            if signal.value != 0:
                signals += 1
            sink.write_line(_replay_record(seq, report, signal))
    finally:
        sink.close()
    mean_ms, p95_ms = _timing_stats(proc_ms)
    metrics = Metrics(
        frames_processed=len(frames) - 1,
        mean_proc_ms=mean_ms,
        p95_proc_ms=p95_ms,
        signals_emitted=signals,
    )
    if cfg.metrics_path:
        write_metrics(metrics, cfg.metrics_path)
    return metrics


# --- closed-loop simulation -------------------------------------------------------------


@dataclass(frozen=True)
class TickRecord:
    """Everything one control tick produced, for traces and live streaming."""

    t: float
    mode: FlightMode
    signal: int
    twist: TwistCommand
    pose: Pose
    frame: Optional[np.ndarray]
    report: Optional[RegionReport]
    proc_ms: Optional[float]
    clearance: Optional[float]


class SimulationRun:
    """One closed-loop episode advanced a tick at a time.

    Each tick: drain operator topics, render (when airborne), detect (when
    in a vision mode), steer, publish the command and navdata over the bus,
    pump fixed-rate topics, then integrate vehicle dynamics with wind.
    Scoring state (lead distance, false positives, clearance) accumulates
    on the instance; :meth:`metrics` snapshots it.
    """

    def __init__(
        self,
        scenario: Scenario,
        cfg: RunConfig,
        auto_takeoff: bool = True,
    ):
        self.scenario = scenario
        self.cfg = cfg
        self.world = scenario.world
        self.camera = scenario.camera
        self.pilot_cfg = scenario.pilot_config(cfg.pilot)
        self.wind = WindState(scenario.seed, self.world.wind,
                              flip_y=self.world.mirror_y)
        self.bus = Bus()
        self._sub_cmd = self.bus.subscribe(TOPIC_CMD_VEL)
        self._sub_takeoff = self.bus.subscribe(TOPIC_TAKEOFF)
        self._sub_land = self.bus.subscribe(TOPIC_LAND)
        self._sub_reset = self.bus.subscribe(TOPIC_RESET)
        self._sub_override = self.bus.subscribe(TOPIC_OVERRIDE)
        self.detector_state = DetectorState(cfg.detector)
        self.mode: FlightMode = GROUNDED
        self.nav = NavEstimate()
        self.pose = Pose()
        self.override: Optional[TwistCommand] = None
        self.prev_frame: Optional[np.ndarray] = None
        self.tick_index = 0
        self.frame_seq = 0
        self.frames_processed = 0
        self.signals_emitted = 0
        self.false_positives = 0
        self.lead_distance: Optional[float] = None
        self.min_clearance: Optional[float] = None
        self.collided = False
        self.goal = False
        self.proc_ms: List[float] = []
        if auto_takeoff:
            self.bus.publish(TOPIC_TAKEOFF, Empty(0.0))

    @property
    def t(self) -> float:
        """Current simulation time (s)."""
        return self.tick_index * DT

    def _drain_operator_topics(self) -> None:
        for _ in self._sub_takeoff.drain():
            self.mode = lifecycle("takeoff", self.mode)
        for _ in self._sub_land.drain():
            self.mode = lifecycle("land", self.mode)
        for _ in self._sub_reset.drain():
            self.mode = lifecycle("reset", self.mode)
            self.override = None
            self.nav = NavEstimate(z=self.pose.z, t=self.nav.t)
        for msg in self._sub_override.drain():
            self.override = msg.twist

    def _score_signal(self, value: int) -> None:
        if value == 0:
            return
        self.signals_emitted += 1
        truth = ground_truth(self.world, self.pose,
                             EVAL_CORRIDOR_WIDTH, EVAL_HORIZON)
        if not truth.obstacle_in_corridor:
            self.false_positives += 1
            return
        correct = (value > 0 and truth.side in ("right", "center")) or \
                  (value < 0 and truth.side in ("left", "center"))
        if correct and self.lead_distance is None:
            self.lead_distance = truth.distance

    def tick(self) -> TickRecord:
        """Advance one control period and return what it produced."""
        t = self.t
        self._drain_operator_topics()

        frame: Optional[np.ndarray] = None
        report: Optional[RegionReport] = None
        proc: Optional[float] = None
        signal_value = 0
        if self.pose.z > _VISION_AIRBORNE_Z:
            frame = render(self.world, self.pose, self.camera)
            self.bus.publish(TOPIC_FRONT_IMAGE, Frame(t, self.frame_seq, frame))
            self.frame_seq += 1
        if frame is not None and self.mode.kind in _VISION_MODES:
            if self.prev_frame is not None:
                began = time.perf_counter()
                signal, report, _ = detect(
                    self.prev_frame, frame, self.detector_state,
                    self.cfg.detector, self.cfg.flow)
                proc = (time.perf_counter() - began) * 1e3
                self.proc_ms.append(proc)
                self.frames_processed += 1
                signal_value = signal.value
                self.bus.publish(TOPIC_SIGNAL, Signal(t, signal))
            self.prev_frame = frame
        else:
            self.prev_frame = None
        self._score_signal(signal_value)

        self.mode, twist = step(self.mode, signal_value, self.nav,
                                self.override, DT, self.pilot_cfg)
        self.bus.publish(TOPIC_CMD_VEL, Twist(t, twist))
        battery = max(0.0, 100.0 - 0.05 * t)
        self.bus.publish(TOPIC_NAVDATA, Nav(t, NavData(
            state=self.mode.kind, yaw=self.pose.yaw, pitch=0.0, roll=0.0,
            altitude=self.pose.z, battery=battery, timestamp=t)))
        self.bus.pump(t)

        applied = twist
        for msg in self._sub_cmd.drain():
            applied = msg.twist
        grounded_target = self.mode.kind in ("grounded", "landing")
        altitude_target = 0.0 if grounded_target else self.pilot_cfg.takeoff_altitude
        self.pose = step_dynamics(self.pose, applied, DT, self.wind,
                                  self.scenario.dynamics,
                                  altitude_target=altitude_target)
        self.nav = replace(dead_reckon(self.nav, twist, DT), z=self.pose.z)

        clearance: Optional[float] = None
        if self.world.obstacles:
            clearance = min(
                math.hypot(self.pose.x - o.center_x, self.pose.y - o.center_y)
                - o.radius
                for o in self.world.obstacles)
            if self.min_clearance is None or clearance < self.min_clearance:
                self.min_clearance = clearance
            if clearance <= 0.0:
                self.collided = True
        if self.nav.traveled_forward >= self.pilot_cfg.goal_distance:
            self.goal = True

        self.tick_index += 1
        return TickRecord(t=t, mode=self.mode, signal=signal_value,
                          twist=twist, pose=self.pose, frame=frame,
                          report=report, proc_ms=proc, clearance=clearance)

    def finished(self) -> bool:
        """True once the episode has concluded (crash, landed, or holding)."""
        if self.collided:
            return True
        if self.mode.kind == "grounded" and self.tick_index > 1:
            return True
        if self.goal and self.mode.kind == "hovering" and \
                self.mode.reason == "waiting":
            return True
        return False

    def metrics(self) -> Metrics:
        mean_ms, p95_ms = _timing_stats(self.proc_ms)
        return Metrics(
            frames_processed=self.frames_processed,
            mean_proc_ms=mean_ms,
            p95_proc_ms=p95_ms,
            signals_emitted=self.signals_emitted,
            lead_distance_m=self.lead_distance,
            false_positive_frames=self.false_positives,
            collisions=int(self.collided),
            min_clearance_m=self.min_clearance,
            goal_reached=self.goal and not self.collided,
        )


def run_sim(scenario: Scenario, cfg: RunConfig) -> Metrics:
    """Run one headless closed-loop episode to completion.

    Terminates on collision, on conclusion (landed after the goal, or
    holding position when the controller is configured to hover there),
    or on the scenario timeout.  Writes one command-trace line per tick to
    ``cfg.telemetry_path`` (stdout when unset) and the summary metrics to
    ``cfg.metrics_path`` when given.
    """
    sim = SimulationRun(scenario, cfg, auto_takeoff=True)
    sink = _Sink(cfg.telemetry_path)
    dump_dir = cfg.dump_frames_path
    if dump_dir:
        os.makedirs(dump_dir, exist_ok=True)
    try:
        while sim.t < scenario.timeout_s - DT / 2:
            record = sim.tick()
            sink.write_line(trace_line(record.t, record.mode, record.signal,
                                       record.twist))
            if dump_dir and record.frame is not None:
                name = os.path.join(dump_dir, f"frame_{sim.frame_seq - 1:06d}.pgm")
                write_pgm(name, record.frame)
            if sim.finished():
                break
    finally:
        sink.close()
    metrics = sim.metrics()
    if cfg.metrics_path:
        write_metrics(metrics, cfg.metrics_path)
    return metrics


def exit_code_for(metrics: Metrics) -> int:
    """Map a finished run onto the process exit convention."""
    if metrics.collisions > 0:
        return EXIT_COLLISION
    if metrics.goal_reached:
        return EXIT_OK
    return EXIT_ERROR
