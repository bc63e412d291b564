"""Live enhancement service: one pipeline thread, WebSocket control plane.

The audio path is a single thread advancing the engine hop by hop from a
looping file source.  Network work happens elsewhere: per-connection
readers validate control messages and forward them into the engine's
mailbox, and telemetry fans out through per-subscriber bounded queues.
A subscriber that stops draining loses snapshots; the audio thread never
waits on a socket.
"""

import asyncio
import threading
import time
from dataclasses import dataclass, field, replace

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .audio_io import DictionaryError, load_dictionary
from .masking import MaskParams
from .pipeline import Enhancer
from .protocol import (
    ProtocolError,
    encode_ack,
    encode_audio,
    encode_hello,
    encode_telemetry,
    parse_control,
)

__all__ = ["Subscriber", "PipelineRunner", "create_app"]

TELEMETRY_HZ = 30.0


@dataclass
class Subscriber:
    """Bridge from the audio thread to one consumer's event loop."""

    queue: object  # asyncio.Queue, bounded
    loop: object = None  # asyncio loop owning the queue; None = thread-safe queue
    want_audio: bool = False
    drops: int = field(default=0)

    def offer(self, item):
        if self.loop is not None:
            self.loop.call_soon_threadsafe(self._put, item)
        else:
            self._put(item)

    def _put(self, item):
        try:
            self.queue.put_nowait(item)
        except Exception:
            self.drops += 1


class PipelineRunner:
    """Advances an Enhancer over a looping stereo source in its own thread."""

    def __init__(self, config, source, pace=True, telemetry_hz=TELEMETRY_HZ):
        if source.ndim != 2 or source.shape[0] != 2:
            raise ValueError("source must be stereo, shaped (2, samples)")
        hop = config.window.hop
        if source.shape[1] < hop:
            raise ValueError("source shorter than one hop")
        self.engine = Enhancer(config)
        self.pace = pace
        self._telemetry_interval = 1.0 / telemetry_hz
        # keep a whole number of hops so every chunk is contiguous
        usable = source.shape[1] - source.shape[1] % hop
        self._source = np.ascontiguousarray(
            source[:, :usable], dtype=config.dtype
        )
        self._hop = hop
        self._pos = 0
        self._looped_once = False
        self._lock = threading.Lock()
        self._intended = config  # config after every accepted post lands
        self._subscribers = []
        self._stop = threading.Event()
        self._thread = None
        self._last_emit = 0.0

    # -- control plane -----------------------------------------------------

    @property
    def intended_config(self):
        with self._lock:
            return self._intended

    @property
    def frames_processed(self):
        return self.engine.telemetry.frame_index if self.engine.telemetry else 0

    def apply(self, kind, payload):
        """Validate a control request against the engine's forward config and
        queue it; returns (applied, reason).  Everything is checked here so a
        queued change can never fail at the frame boundary."""
        with self._lock:
            try:
                changes = self._changes_for(kind, payload)
                self._intended = replace(self._intended, **changes)
            except (ValueError, OSError, DictionaryError) as exc:
                return False, str(exc)
            self.engine.post(**changes)
            return True, None

    def _changes_for(self, kind, payload):
        if kind == "set_mask_params":
            merged = self._intended.mask.to_dict()
            merged.update(payload)
            return {"mask": MaskParams.from_dict(merged)}
        if kind == "set_tdoa_override":
            return {"tdoa_override": payload["tdoa_index"]}
        if kind == "clear_tdoa_override":
            return {"tdoa_override": None}
        if kind == "set_localizer":
            changes = {"localizer_mode": payload["mode"]}
            if "window_frames" in payload:
                changes["sliding_frames"] = payload["window_frames"]
            return changes
        if kind == "set_dictionary":
            return {"dictionary": load_dictionary(payload["path"])}
        raise ValueError(f"unknown control kind {kind!r}")

    # -- telemetry fan-out ---------------------------------------------------

    def subscribe(self, subscriber):
        with self._lock:
            self._subscribers.append(subscriber)

    def unsubscribe(self, subscriber):
        with self._lock:
            if subscriber in self._subscribers:
                self._subscribers.remove(subscriber)

    def _broadcast(self, out_chunk):
        with self._lock:
            subscribers = list(self._subscribers)
        if not subscribers:
            return
        t = self.engine.telemetry
        now = time.monotonic()
        blob = None
        if now - self._last_emit >= self._telemetry_interval:
            self._last_emit = now
            blob = encode_telemetry(
                frame_index=t.frame_index,
                tau_index=t.tau_index,
                angular=t.angular,
                mask=t.mask,
                gains=t.gains,
                latency_ms=t.latency_ms,
                frame_time_us=t.frame_time_us,
                looped=self._looped_once,
            )
        audio = None
        for sub in subscribers:
            if blob is not None:
                sub.offer(blob)
            if sub.want_audio:
                if audio is None:
                    audio = encode_audio(
                        t.frame_index, out_chunk, looped=self._looped_once
                    )
                sub.offer(audio)

    # -- audio thread --------------------------------------------------------

    def step(self):
        """Process one hop; public so tests can drive the loop by hand."""
        chunk = self._source[:, self._pos : self._pos + self._hop]
        self._pos += self._hop
        if self._pos >= self._source.shape[1]:
            self._pos = 0
            self._looped_once = True
        out = self.engine.process_frame(chunk)
        self._broadcast(out)
        return out

    def _run(self):
        frame_period = self._hop / self.engine.config.fs
        next_due = time.monotonic()
        while not self._stop.is_set():
            self.step()
            if self.pace:
                next_due += frame_period
                delay = next_due - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_due = time.monotonic()  # fell behind; don't sprint

    def start(self):
        if self._thread is not None:
            raise RuntimeError("runner already started")
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None


def create_app(runner):
    app = FastAPI(title="stereonmf live control")

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "frames": runner.frames_processed,
            "looped": runner._looped_once,
        }

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        want_audio = ws.query_params.get("audio") == "1"
        await ws.send_text(
            encode_hello(runner.intended_config, looped=runner._looped_once)
        )
        sub = Subscriber(
            queue=asyncio.Queue(maxsize=8),
            loop=asyncio.get_running_loop(),
            want_audio=want_audio,
        )
        runner.subscribe(sub)
        last_msg_id = -1

        async def pump_telemetry():
            while True:
                await ws.send_bytes(await sub.queue.get())

        pump = asyncio.create_task(pump_telemetry())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = parse_control(text)
                except ProtocolError as exc:
                    await ws.send_text(encode_ack(None, "rejected", str(exc)))
                    continue
                if msg.msg_id <= last_msg_id:
                    await ws.send_text(
                        encode_ack(
                            msg.msg_id,
                            "rejected",
                            f"msg_id {msg.msg_id} is not greater than "
                            f"{last_msg_id}",
                        )
                    )
                    continue
                last_msg_id = msg.msg_id
                ok, reason = runner.apply(msg.kind, msg.payload)
                status = "applied" if ok else "rejected"
                await ws.send_text(encode_ack(msg.msg_id, status, reason))
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            runner.unsubscribe(sub)

    return app
