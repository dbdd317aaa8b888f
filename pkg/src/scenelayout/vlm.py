"""Vision-language model bridge.

Three chat roles drive a layout session: a generator proposes which object to
place and a coarse pose, a worker refines the pose from an annotated render
plus judge feedback, and an optional model judge comments on a deterministic
energy breakdown. All replies must be a single JSON object; malformed replies
get one repair prompt per retry before :class:`ProtocolError` is raised.

Transports are pluggable: :class:`HttpTransport` speaks the common
chat-completions dialect, :class:`ReplayTransport` replays a recorded
transcript for offline tests, and :func:`make_stub_server` serves canned
replies over real HTTP.
"""

from __future__ import annotations

import base64
import json
import os
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Iterable, Protocol

from importlib import resources

from .energy import EnergyBreakdown


class TransportError(RuntimeError):
    """The transport could not produce a reply (network, exhausted replay)."""


class ProtocolError(RuntimeError):
    """The model replied, but not with the JSON the protocol requires."""

    def __init__(self, message: str, raw: str) -> None:
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class VlmConfig:
    endpoint: str = "http://127.0.0.1:8080/v1/chat/completions"
    model: str = "layout-vlm"
    api_key_env: str = "VLM_API_KEY"
    timeout_s: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0


class Transport(Protocol):
    def send(self, step: str, messages: list[dict[str, Any]], config: VlmConfig) -> str:
        """Return the assistant reply text for one request."""


class HttpTransport:
    """POSTs chat-completions requests with ``requests``."""

    def send(self, step: str, messages: list[dict[str, Any]], config: VlmConfig) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            resp = requests.post(
                config.endpoint,
                json={
                    "model": config.model,
                    "messages": messages,
                    "temperature": config.temperature,
                },
                headers=headers,
                timeout=config.timeout_s,
            )
            resp.raise_for_status()
            data = resp.json()
        except requests.RequestException as exc:
            raise TransportError(f"{step} request to {config.endpoint} failed: {exc}") from exc
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat-completions response: {data!r}") from exc


class ReplayTransport:
    """Replays recorded replies in order, validating the step each was for."""

    def __init__(self, entries: Iterable[dict[str, Any]]) -> None:
        self._entries = list(entries)
        self._cursor = 0

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "ReplayTransport":
        entries = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if line:
                entries.append(json.loads(line))
        return cls(entries)

    @property
    def remaining(self) -> int:
        return len(self._entries) - self._cursor

    def send(self, step: str, messages: list[dict[str, Any]], config: VlmConfig) -> str:
        if self._cursor >= len(self._entries):
            raise TransportError(f"replay exhausted after {self._cursor} replies (wanted {step})")
        entry = self._entries[self._cursor]
        self._cursor += 1
        expected = entry.get("step")
        if expected is not None and expected != step:
            raise TransportError(
                f"replay entry {self._cursor - 1} answers {expected!r}, pipeline asked for {step!r}"
            )
        return entry["content"]


class TranscriptLog:
    """Appends request/reply pairs as one JSON object per line."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._index = 0
        self._lock = threading.Lock()

    def record(self, step: str, messages: list[dict[str, Any]], reply: str) -> None:
        entry = {"index": self._index, "step": step, "request": messages, "content": reply}
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
            self._index += 1


def _prompt(name: str) -> str:
    return resources.files("scenelayout").joinpath(f"prompts/{name}.txt").read_text()


def extract_json(text: str) -> dict[str, Any]:
    """First JSON object found in the text, tolerating prose around it."""
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            value, _ = decoder.raw_decode(text, start)
        except ValueError:
            start = text.find("{", start + 1)
            continue
        if isinstance(value, dict):
            return value
        start = text.find("{", start + 1)
    raise ValueError("no JSON object in reply")


_REPAIR = (
    "Your previous reply could not be parsed. Reply again with exactly one JSON "
    "object and no surrounding prose."
)


def _image_block(svg: str | None) -> str:
    if not svg:
        return ""
    encoded = base64.b64encode(svg.encode("utf-8")).decode("ascii")
    return f"\n\nAnnotated render (SVG, base64):\n{encoded}\n"


class VlmClient:
    """Step-level protocol wrapper over a transport."""

    def __init__(
        self,
        config: VlmConfig,
        transport: Transport | None = None,
        transcript: TranscriptLog | None = None,
    ) -> None:
        self.config = config
        self.transport = transport if transport is not None else HttpTransport()
        self.transcript = transcript

    def _ask(self, step: str, system: str, user: str) -> dict[str, Any]:
        messages = [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ]
        attempts = self.config.max_retries + 1
        last_raw = ""
        for attempt in range(attempts):
            raw = self.transport.send(step, messages, self.config)
            if self.transcript is not None:
                self.transcript.record(step, messages, raw)
            last_raw = raw
            try:
                return extract_json(raw)
            except ValueError:
                messages = messages + [
                    {"role": "assistant", "content": raw},
                    {"role": "user", "content": _REPAIR},
                ]
        raise ProtocolError(f"{step} reply was not JSON after {attempts} attempts", last_raw)

    def generate_step(self, instruction: str, scene_text: str) -> dict[str, Any]:
        """Propose the object to place and a coarse pose.

        Expected keys: object_id, position [x, y, z], yaw.
        """
        user = _prompt("generate").format(instruction=instruction, scene=scene_text)
        return self._ask("generate", _SYSTEM, user)

    def worker_step(
        self,
        instruction: str,
        scene_text: str,
        object_id: str,
        feedback: list[dict[str, Any]],
        svg: str | None = None,
    ) -> dict[str, Any]:
        """Refine the target pose. Expected keys: position [x, y, z], yaw."""
        user = _prompt("worker").format(
            instruction=instruction,
            scene=scene_text,
            object_id=object_id,
            feedback=json.dumps(feedback, sort_keys=True),
        ) + _image_block(svg)
        return self._ask("worker", _SYSTEM, user)

    def judge_step(
        self,
        instruction: str,
        scene_text: str,
        energy: EnergyBreakdown,
        svg: str | None = None,
    ) -> dict[str, Any]:
        """Second-opinion verdict over a deterministic energy breakdown.

        Expected keys: passed (bool), comments (str).
        """
        energy_doc = {
            "collision": energy.collision,
            "distance": energy.distance,
            "affordance": energy.affordance,
            "social": energy.social,
            "culture": energy.culture,
            "total": energy.total,
        }
        user = _prompt("judge").format(
            instruction=instruction,
            scene=scene_text,
            energy=json.dumps(energy_doc, sort_keys=True),
        ) + _image_block(svg)
        return self._ask("judge", _SYSTEM, user)


_SYSTEM = (
    "You are a precise 3D layout assistant. Coordinates are meters, yaw is "
    "degrees about the vertical axis, and every reply must be a single JSON "
    "object with no markdown fences."
)


# --- stub HTTP server -----------------------------------------------------------


def make_stub_server(
    replies: Iterable[str], host: str = "127.0.0.1", port: int = 0
) -> ThreadingHTTPServer:
    """HTTP server that answers chat-completions posts with canned replies.

    Replies are served in order; further requests get HTTP 410. Start it with
    ``threading.Thread(target=server.serve_forever, daemon=True)`` and read
    the bound port from ``server.server_address``.
    """
    queue = list(replies)
    lock = threading.Lock()

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self) -> None:  # noqa: N802 - http.server API
            length = int(self.headers.get("Content-Length", "0"))
            self.rfile.read(length)
            with lock:
                reply = queue.pop(0) if queue else None
            if reply is None:
                self.send_response(410)
                self.end_headers()
                return
            body = json.dumps(
                {"choices": [{"message": {"role": "assistant", "content": reply}}]}
            ).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, format: str, *args: Any) -> None:  # noqa: A002
            pass

    return ThreadingHTTPServer((host, port), Handler)


def stub_replies_from_jsonl(path: str | Path) -> list[str]:
    """Contents of a transcript/replay file, in order, for the stub server."""
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            out.append(json.loads(line)["content"])
    return out
