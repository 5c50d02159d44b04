"""Command line entry points: validate, simulate, replay, bench-retrieval, serve."""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import assets
from .config import build_session_config, load_config_file
from .errors import EngineError
from .hand import load_hand_model
from .library import load_library
from .retrieval import RetrievalBackend, load_benchmark, run_benchmark
from .session import Engine, run_scripted_session
from .sim import load_track, read_demonstration


def _load_model_and_library(library_path, hand_model_path):
    library_path = Path(library_path) if library_path else assets.bundled_library_path()
    if hand_model_path:
        model = load_hand_model(hand_model_path)
    else:
        import yaml

        doc = yaml.safe_load(Path(library_path).read_text()) or {}
        model_id = str(doc.get("hand_model_id", "leap16"))
        model = load_hand_model(assets.resolve_hand_model_path(model_id, near=Path(library_path)))
    return model, load_library(library_path, model)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


library_option = click.option("--library", "library_path", type=click.Path(exists=True), default=None)


def controller_options(fn):
    """Controller config fields, each overriding the config file value."""
    for name in ("--v-max-trans", "--a-trans", "--k-rot", "--w-max-rot", "--loop-hz"):
        fn = click.option(name, type=float, default=None)(fn)
    return fn


def _session_config(config_path, **overrides):
    doc = load_config_file(config_path) if config_path else None
    return build_session_config(doc, **overrides)
hand_model_option = click.option(
    "--hand-model", "hand_model_path", type=click.Path(exists=True), default=None
)
json_option = click.option("--json", "as_json", is_flag=True, help="machine-readable report")


@click.group()
def main():
    """Type-guided dexterous teleoperation engine."""


@main.command()
@click.argument("file", type=click.Path(exists=True))
@hand_model_option
@json_option
def validate(file, hand_model_path, as_json):
    """Validate a manipulation type library file."""
    try:
        model, library = _load_model_and_library(file, hand_model_path)
    except EngineError as exc:
        if as_json:
            click.echo(json.dumps({"ok": False, "error": str(exc)}))
        _fail(str(exc))
    subs = library.sub_categories()
    if as_json:
        click.echo(
            json.dumps(
                {
                    "ok": True,
                    "types": len(library),
                    "sub_categories": list(subs),
                    "hand_model": model.id,
                }
            )
        )
    else:
        click.echo(f"{len(library)} types, {len(subs)} sub-categories")


@main.command()
@click.option("--track", "track_path", type=click.Path(exists=True), default=None)
@click.option("--type", "type_id", required=True, help="manipulation type id to drive")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--duration", type=float, default=None, help="seconds (default: track length)")
@click.option("--seed", type=int, default=0)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--report-dir", type=click.Path(), default=None)
@controller_options
@library_option
@hand_model_option
@json_option
def simulate(track_path, type_id, out_path, duration, seed, config_path, report_dir, library_path, hand_model_path, as_json, v_max_trans, a_trans, k_rot, w_max_rot, loop_hz):
    """Run a scripted teleoperation session and record a demonstration."""
    try:
        model, library = _load_model_and_library(library_path, hand_model_path)
        track = load_track(track_path or assets.bundled_track_path("pour"))
        config = _session_config(
            config_path,
            v_max_trans=v_max_trans, a_trans=a_trans, k_rot=k_rot,
            w_max_rot=w_max_rot, loop_hz=loop_hz,
        )
        engine = Engine(model, library, config=config, seed=seed)
        ticks = run_scripted_session(engine, track, type_id)
        frames = list(engine.recorder.frames)
        count = engine.save_recording(out_path)
    except EngineError as exc:
        _fail(str(exc))
    report_files = []
    if report_dir:
        from .report import save_demo_report
        from .sim import demo_header

        header = demo_header(model, library, seed=seed, loop_hz=config.controller.loop_hz)
        report_files = [str(p) for p in save_demo_report(header, frames, report_dir)]
    if as_json:
        click.echo(
            json.dumps(
                {"ok": True, "out": str(out_path), "frames": count, "ticks": ticks, "report": report_files}
            )
        )
    else:
        click.echo(f"wrote {count} frames ({ticks} ticks) to {out_path}")
        for path in report_files:
            click.echo(f"report: {path}")


@main.command()
@click.argument("file", type=click.Path(exists=True))
@click.option("--speed", type=float, default=0.0, help="pace factor; 0 = no pacing")
@click.option("--report-dir", type=click.Path(), default=None)
@json_option
def replay(file, speed, report_dir, as_json):
    """Stream a recorded demonstration back in order."""
    try:
        header, frames = read_demonstration(file)
    except EngineError as exc:
        _fail(str(exc))
    if speed > 0:
        previous = None
        for frame in frames:
            if previous is not None:
                time.sleep(max(0.0, (frame.timestamp - previous) / speed))
            previous = frame.timestamp
    duration = frames[-1].timestamp if frames else 0.0
    report_files = []
    if report_dir:
        from .report import save_demo_report

        report_files = [str(p) for p in save_demo_report(header, frames, report_dir)]
    if as_json:
        click.echo(
            json.dumps(
                {
                    "ok": True,
                    "frames": len(frames),
                    "duration_s": duration,
                    "header": header,
                    "report": report_files,
                }
            )
        )
    else:
        click.echo(
            f"{len(frames)} frames, {duration:.2f} s, hand model {header.get('hand_model_id', '?')}"
        )
        for path in report_files:
            click.echo(f"report: {path}")


@main.command("bench-retrieval")
@click.option("--cases", "cases_path", type=click.Path(exists=True), default=None)
@click.option("--min-pass", type=int, default=0, help="exit nonzero when fewer cases pass")
@click.option("--report-dir", type=click.Path(), default=None)
@library_option
@hand_model_option
@json_option
def bench_retrieval(cases_path, min_pass, report_dir, library_path, hand_model_path, as_json):
    """Score the retrieval stack against the bundled benchmark."""
    try:
        _, library = _load_model_and_library(library_path, hand_model_path)
        cases = load_benchmark(cases_path or assets.bundled_benchmark_path())
        report = run_benchmark(cases, library)
    except EngineError as exc:
        _fail(str(exc))
    report_files = []
    if report_dir:
        from .report import save_benchmark_report

        report_files = [str(p) for p in save_benchmark_report(report, report_dir)]
    if as_json:
        click.echo(
            json.dumps(
                {
                    "ok": True,
                    "passed": report.passed,
                    "total": len(report),
                    "report": report_files,
                    "cases": [
                        {
                            "id": r.case_id,
                            "kind": r.kind,
                            "passed": r.passed,
                            "expected": r.expected,
                            "got": r.got,
                        }
                        for r in report.results
                    ],
                }
            )
        )
    else:
        for r in report.results:
            status = "pass" if r.passed else f"FAIL (want {r.expected}, got {r.got})"
            click.echo(f"{r.case_id} [{r.kind}] {status}")
        click.echo(f"{report.passed}/{len(report)} passed")
        for path in report_files:
            click.echo(f"report: {path}")
    if report.passed < min_pass:
        sys.exit(1)


@main.command()
@click.option("--listen", default=None, help="host:port (default LISTEN_ADDR or 127.0.0.1:8765)")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--console-dir", type=click.Path(exists=True), default=None)
@click.option("--user-library", "user_library_path", type=click.Path(), default=None,
              help="file where taught types are appended and merged on load")
@click.option("--seed", type=int, default=0)
@controller_options
@library_option
@hand_model_option
def serve(listen, config_path, console_dir, user_library_path, seed, library_path, hand_model_path, v_max_trans, a_trans, k_rot, w_max_rot, loop_hz):
    """Serve the operator session over WebSocket."""
    from .server import serve as run_server

    try:
        model, library = _load_model_and_library(library_path, hand_model_path)
        config = _session_config(
            config_path,
            v_max_trans=v_max_trans, a_trans=a_trans, k_rot=k_rot,
            w_max_rot=w_max_rot, loop_hz=loop_hz,
        )
        engine = Engine(
            model, library, config=config, backend=RetrievalBackend.from_env(), seed=seed,
            user_library_path=user_library_path,
        )
        run_server(engine, listen=listen, console_dir=console_dir)
    except (EngineError, ValueError) as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
