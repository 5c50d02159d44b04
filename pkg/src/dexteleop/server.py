"""WebSocket bridge between the engine and operator consoles.

One engine instance ticks on the event loop at the control rate; consoles
connect over /ws, receive a full snapshot on join, then the 15 Hz snapshot
stream plus any plan notices and errors.  Inbound frames are validated per
connection (monotone sequence numbers) and handed to the engine between
ticks.
"""

from __future__ import annotations

import asyncio
import contextlib
import os
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .errors import ProtocolError
from .session import Engine, decode_message, encode_message

DEFAULT_LISTEN = "127.0.0.1:8765"


def make_app(engine: Engine, console_dir: str | Path | None = None) -> FastAPI:
    clients: set[asyncio.Queue] = set()

    async def engine_loop():
        dt = engine.config.controller.dt
        while True:
            engine.tick()
            for msg in engine.poll_outbound():
                text = encode_message(msg)
                for queue in list(clients):
                    queue.put_nowait(text)
            await asyncio.sleep(dt)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(engine_loop())
        try:
            yield
        finally:
            task.cancel()

    app = FastAPI(title="dexteleop session server", lifespan=lifespan)
    app.state.engine = engine
    app.state.clients = clients

    @app.get("/health")
    async def health():
        return {"status": "ok", "tick": engine.tick_count, "mode": engine.mode}

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue()
        clients.add(queue)
        await websocket.send_text(encode_message(engine.snapshot_message(full=True)))
        last_seq = -1

        async def pump_outbound():
            while True:
                await websocket.send_text(await queue.get())

        sender = asyncio.create_task(pump_outbound())
        try:
            while True:
                event = await websocket.receive()
                if event["type"] == "websocket.disconnect":
                    break
                raw = event.get("text")
                if raw is None:
                    raw = event.get("bytes", b"")
                try:
                    msg = decode_message(raw)
                except ProtocolError as exc:
                    engine.reject(str(exc), "protocol", exc.field)
                    continue
                if msg.seq <= last_seq:
                    engine.reject(
                        f"stale sequence number {msg.seq} (last was {last_seq})", "protocol", "seq"
                    )
                    continue
                last_seq = msg.seq
                engine.handle_message(msg)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            clients.discard(queue)

    if console_dir is not None and Path(console_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(console_dir), html=True), name="console")

    return app


def parse_listen_addr(value: str | None = None) -> tuple[str, int]:
    value = value or os.environ.get("LISTEN_ADDR", DEFAULT_LISTEN)
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"LISTEN_ADDR must look like host:port, got {value!r}")
    return host, int(port)


def serve(engine: Engine, listen: str | None = None, console_dir: str | Path | None = None) -> None:
    import uvicorn

    host, port = parse_listen_addr(listen)
    uvicorn.run(make_app(engine, console_dir=console_dir), host=host, port=port, log_level="warning")
