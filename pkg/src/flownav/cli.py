"""Command-line runner: ``replay``, ``sim``, and ``serve`` subcommands.

Exit codes: 0 when the goal was reached (sim) or the replay completed,
2 on collision, 1 on any error or timeout.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .harness import (
    EXIT_ERROR,
    EXIT_OK,
    HarnessError,
    Metrics,
    exit_code_for,
    load_run_config,
    load_scenario,
    run_replay,
    run_sim,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flownav",
        description="Optical-flow obstacle avoidance: offline replay, "
                    "closed-loop simulation, and a live operator server.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    replay = sub.add_parser("replay", help="run the detector over recorded frames")
    replay.add_argument("--frames", required=True,
                        help="directory of PGM/PNG frames, lexicographic order")
    replay.add_argument("--config", help="JSON config (detector/flow/pilot)")
    replay.add_argument("--out", help="write summary metrics JSON here")
    replay.add_argument("--telemetry",
                        help="write per-frame JSON lines here (default stdout)")

    sim = sub.add_parser("sim", help="run one closed-loop simulated episode")
    sim.add_argument("--scenario", required=True, help="scenario JSON file")
    sim.add_argument("--config", help="JSON config (detector/flow/pilot)")
    sim.add_argument("--seed", type=int, help="override the scenario seed")
    sim.add_argument("--out", help="write summary metrics JSON here")
    sim.add_argument("--telemetry",
                     help="write per-tick command trace here (default stdout)")
    sim.add_argument("--dump-frames", help="also write rendered frames (PGM) here")

    serve = sub.add_parser("serve", help="expose the live loop to the console")
    serve.add_argument("--scenario", required=True, help="scenario JSON file")
    serve.add_argument("--config", help="JSON config (detector/flow/pilot)")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--host", default="127.0.0.1")
    return parser


def _summarize(metrics: Metrics) -> None:
    timing = ""
    if metrics.mean_proc_ms is not None:
        timing = (f", {metrics.mean_proc_ms:.1f} ms mean "
                  f"({metrics.p95_proc_ms:.1f} ms p95)")
    print(
        f"frames={metrics.frames_processed} signals={metrics.signals_emitted}"
        f" false_positives={metrics.false_positive_frames}"
        f" collisions={metrics.collisions}"
        f" goal={'yes' if metrics.goal_reached else 'no'}{timing}",
        file=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            cfg = load_run_config(args.config, "replay",
                                  frames_path=args.frames,
                                  metrics_path=args.out,
                                  telemetry_path=args.telemetry)
            metrics = run_replay(args.frames, cfg)
            _summarize(metrics)
            return EXIT_OK
        if args.command == "sim":
            cfg = load_run_config(args.config, "sim",
                                  scenario_path=args.scenario,
                                  metrics_path=args.out,
                                  telemetry_path=args.telemetry,
                                  dump_frames_path=args.dump_frames)
            scenario = load_scenario(args.scenario)
            if args.seed is not None:
                scenario = replace(scenario, seed=args.seed)
            metrics = run_sim(scenario, cfg)
            _summarize(metrics)
            return exit_code_for(metrics)
        cfg = load_run_config(args.config, "serve",
                              scenario_path=args.scenario, port=args.port)
        scenario = load_scenario(args.scenario)
        from .server import serve  # deferred: pulls in the web stack

        serve(args.port, scenario, cfg, host=args.host)
        return EXIT_OK
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
