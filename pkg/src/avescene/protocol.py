"""Datagram protocol between the scene engine and its clients.

Wire format, all header fields big-endian for bit-exact interop:

    magic    4 bytes  "AVE1"
    msg_id   u32      per-sender monotonic
    msg_type u8
    frag_index u16
    frag_count u16
    payload_len u16   <= 1200
    payload  bytes

Message bodies are canonical JSON (the scene interchange schema). Bodies
over 1200 bytes are fragmented; receivers reassemble by (peer, msg_id),
deduplicate delivered msg_ids over a sliding window, and expire stale
partial messages. Hostile input never raises past the reassembler: every
bad frame is dropped and counted.

Delivery model: clients retry requests (same msg_id) until they see the
echoing ACK/ERR/snapshot; the server applies each msg_id at most once and
replays the cached response for retries, so mutations are exactly-once in
effect even over a lossy, reordering, duplicating channel. Committed
mutations are broadcast as SCENE_EVENT; a client that spots a revision
gap recovers with GET_SCENE.
"""

from __future__ import annotations

import itertools
import logging
import struct
import time
from collections import Counter, OrderedDict
from dataclasses import dataclass, field

from . import jsonio, scene as scenemod
from .detection import Detection
from .errors import AveSceneError, DanglingReference, DomainError, EncodeError, ParseError
from .geodesy import LocalCoord
from .projection import ProjectorPose

logger = logging.getLogger(__name__)

MAGIC = b"AVE1"
HEADER = struct.Struct(">4sIBHHH")
HEADER_SIZE = HEADER.size  # 15
MAX_PAYLOAD = 1200
MAX_FRAGMENTS = 0xFFFF
DEDUPE_WINDOW = 1024
REASSEMBLY_TIMEOUT = 5.0
MAX_PARTIAL_GROUPS = 64

MSG_HELLO = 1
MSG_ACK = 2
MSG_ERR = 3
MSG_GET_SCENE = 4
MSG_SCENE_SNAPSHOT = 5
MSG_SET_POSE = 6
MSG_ADD_IMAGE = 7
MSG_ADD_DETECTIONS = 8
MSG_SCENE_EVENT = 9

MSG_NAMES = {
    MSG_HELLO: "HELLO",
    MSG_ACK: "ACK",
    MSG_ERR: "ERR",
    MSG_GET_SCENE: "GET_SCENE",
    MSG_SCENE_SNAPSHOT: "SCENE_SNAPSHOT",
    MSG_SET_POSE: "SET_POSE",
    MSG_ADD_IMAGE: "ADD_IMAGE",
    MSG_ADD_DETECTIONS: "ADD_DETECTIONS",
    MSG_SCENE_EVENT: "SCENE_EVENT",
}
_REQUEST_TYPES = {MSG_HELLO, MSG_GET_SCENE, MSG_SET_POSE, MSG_ADD_IMAGE, MSG_ADD_DETECTIONS}


@dataclass(frozen=True)
class Frame:
    msg_id: int
    msg_type: int
    frag_index: int
    frag_count: int
    payload: bytes

    def encode(self) -> bytes:
        return HEADER.pack(
            MAGIC, self.msg_id, self.msg_type, self.frag_index, self.frag_count,
            len(self.payload),
        ) + self.payload


@dataclass(frozen=True)
class Message:
    msg_type: int
    body: bytes  # canonical JSON
    msg_id: int = 0

    def json(self) -> dict:
        if not self.body:
            return {}
        doc = jsonio.loads(self.body, what=f"{MSG_NAMES.get(self.msg_type, self.msg_type)} body")
        if not isinstance(doc, dict):
            raise ParseError("message body must be a JSON object", path="$")
        return doc


def make_message(msg_type: int, body: dict | None = None, msg_id: int = 0) -> Message:
    payload = b"" if body is None else jsonio.canonical_dumps(body).encode("ascii")
    return Message(msg_type=msg_type, body=payload, msg_id=msg_id)


def encode(msg: Message) -> list[Frame]:
    """Split a message into wire frames; always at least one frame."""
    body = msg.body
    frag_count = max(1, -(-len(body) // MAX_PAYLOAD))
    if frag_count > MAX_FRAGMENTS:
        raise EncodeError(
            f"body of {len(body)} bytes needs {frag_count} fragments (max {MAX_FRAGMENTS})"
        )
    frames = []
    for i in range(frag_count):
        chunk = body[i * MAX_PAYLOAD:(i + 1) * MAX_PAYLOAD]
        frames.append(
            Frame(
                msg_id=msg.msg_id,
                msg_type=msg.msg_type,
                frag_index=i,
                frag_count=frag_count,
                payload=chunk,
            )
        )
    return frames


def encode_datagrams(msg: Message) -> list[bytes]:
    return [f.encode() for f in encode(msg)]


def decode_frame(data: bytes) -> tuple[Frame | None, str]:
    """Parse one datagram; returns (frame, "") or (None, drop_reason)."""
    if len(data) < HEADER_SIZE:
        return None, "short_header"
    magic, msg_id, msg_type, frag_index, frag_count, payload_len = HEADER.unpack_from(data)
    if magic != MAGIC:
        return None, "bad_magic"
    if payload_len > MAX_PAYLOAD:
        return None, "oversize_payload"
    if len(data) - HEADER_SIZE != payload_len:
        return None, "length_mismatch"
    if frag_count == 0 or frag_index >= frag_count:
        return None, "bad_fragment_index"
    return (
        Frame(
            msg_id=msg_id,
            msg_type=msg_type,
            frag_index=frag_index,
            frag_count=frag_count,
            payload=data[HEADER_SIZE:],
        ),
        "",
    )


@dataclass
class _PartialMessage:
    msg_type: int
    frag_count: int
    fragments: dict[int, bytes] = field(default_factory=dict)
    first_seen: float = 0.0


class Reassembler:
    """Per-peer fragment regrouping with dedupe and expiry. Never raises on
    hostile input; drop reasons are tallied in `drops`."""

    def __init__(self, window: int = DEDUPE_WINDOW, timeout: float = REASSEMBLY_TIMEOUT):
        self.window = window
        self.timeout = timeout
        self.partial: dict[int, _PartialMessage] = {}
        self.delivered: OrderedDict[int, bool] = OrderedDict()
        self.drops: Counter[str] = Counter()

    def feed(self, data: bytes, now: float | None = None) -> tuple[list[Message], list[int]]:
        """Returns (completed messages, duplicate msg_ids seen again)."""
        now = time.monotonic() if now is None else now
        self.expire(now)

        frame, reason = decode_frame(data)
        if frame is None:
            self.drops[reason] += 1
            return [], []

        if frame.msg_id in self.delivered:
            return [], [frame.msg_id]

        group = self.partial.get(frame.msg_id)
        if group is None:
            if len(self.partial) >= MAX_PARTIAL_GROUPS:
                oldest = min(self.partial, key=lambda mid: self.partial[mid].first_seen)
                del self.partial[oldest]
                self.drops["partial_overflow"] += 1
            group = _PartialMessage(
                msg_type=frame.msg_type, frag_count=frame.frag_count, first_seen=now
            )
            self.partial[frame.msg_id] = group
        elif group.frag_count != frame.frag_count or group.msg_type != frame.msg_type:
            self.drops["inconsistent_group"] += 1
            return [], []

        existing = group.fragments.get(frame.frag_index)
        if existing is not None:
            if existing != frame.payload:
                self.drops["conflicting_duplicate"] += 1
            return [], []
        group.fragments[frame.frag_index] = frame.payload

        if len(group.fragments) < group.frag_count:
            return [], []

        body = b"".join(group.fragments[i] for i in range(group.frag_count))
        del self.partial[frame.msg_id]
        self._mark_delivered(frame.msg_id)
        return [Message(msg_type=group.msg_type, body=body, msg_id=frame.msg_id)], []

    def expire(self, now: float) -> None:
        stale = [mid for mid, g in self.partial.items() if now - g.first_seen > self.timeout]
        for mid in stale:
            del self.partial[mid]
            self.drops["expired_partial"] += 1

    def _mark_delivered(self, msg_id: int) -> None:
        self.delivered[msg_id] = True
        while len(self.delivered) > self.window:
            self.delivered.popitem(last=False)


# --- scene owner and server core ---------------------------------------------


def mutation_from_message(msg_type: int, body: dict) -> scenemod.Mutation:
    try:
        if msg_type == MSG_SET_POSE:
            pose = body["pose"]
            return scenemod.SetProjectorPose(
                projector_id=int(body["projector_id"]),
                pose=ProjectorPose(
                    position=LocalCoord(*(float(v) for v in pose["position"])),
                    yaw=float(pose["yaw"]),
                    pitch=float(pose.get("pitch", 0.0)),
                    roll=float(pose.get("roll", 0.0)),
                ),
            )
        if msg_type == MSG_ADD_IMAGE:
            return scenemod.AddImage(image=scenemod.image_from_dict(body["image"]))
        if msg_type == MSG_ADD_DETECTIONS:
            return scenemod.AddDetections(
                detections=tuple(
                    scenemod.detection_from_dict(d) for d in body["detections"]
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad mutation body: {exc!r}") from exc
    raise DomainError(f"message type {msg_type} is not a mutation")


def mutation_summary(mutation: scenemod.Mutation) -> dict:
    if isinstance(mutation, scenemod.SetProjectorPose):
        return {"kind": "set_projector_pose", "projector_id": mutation.projector_id}
    if isinstance(mutation, scenemod.AddImage):
        return {"kind": "add_image", "image_id": mutation.image.image_id}
    if isinstance(mutation, scenemod.AddDetections):
        return {"kind": "add_detections", "count": len(mutation.detections)}
    if isinstance(mutation, scenemod.RebuildGeometry):
        return {"kind": "rebuild_geometry", "buildings": len(mutation.footprints)}
    if isinstance(mutation, scenemod.SetFrame):
        return {"kind": "set_frame"}
    return {"kind": type(mutation).__name__}


class SceneOwner:
    """The single writer. Everyone else reads immutable snapshots."""

    def __init__(self, scene: scenemod.SceneState, persist_path=None):
        self._scene = scene
        self._persist_path = persist_path

    @property
    def scene(self) -> scenemod.SceneState:
        return self._scene

    def commit(self, mutation: scenemod.Mutation) -> tuple[int, dict]:
        new_scene = scenemod.apply(self._scene, mutation)
        self._scene = new_scene
        if self._persist_path is not None:
            tmp = str(self._persist_path) + ".tmp"
            with open(tmp, "wb") as fh:
                fh.write(scenemod.save(new_scene))
            import os

            os.replace(tmp, self._persist_path)
        summary = mutation_summary(mutation)
        summary["revision"] = new_scene.revision
        return new_scene.revision, summary


class ServerCore:
    """Transport-independent request handling and event fan-out.

    `handle_message` returns (peer, message) pairs for the runtime to
    route; datagram peers additionally go through `handle_datagram`,
    which owns reassembly and response replay for retried msg_ids.
    """

    def __init__(self, owner: SceneOwner, now_fn=time.monotonic):
        self.owner = owner
        self._now = now_fn
        self._msg_ids = itertools.count(1)
        self._reassemblers: dict[object, Reassembler] = {}
        self._responses: dict[object, OrderedDict[int, Message]] = {}
        self.peers: set = set()

    def _next_id(self) -> int:
        return next(self._msg_ids)

    def register_peer(self, peer) -> None:
        self.peers.add(peer)

    def drop_peer(self, peer) -> None:
        self.peers.discard(peer)
        self._reassemblers.pop(peer, None)
        self._responses.pop(peer, None)

    def handle_datagram(self, peer, data: bytes) -> list[tuple[object, Message]]:
        self.register_peer(peer)
        reasm = self._reassemblers.setdefault(peer, Reassembler())
        messages, duplicates = reasm.feed(data, self._now())

        out: list[tuple[object, Message]] = []
        for msg_id in duplicates:
            cached = self._responses.get(peer, {}).get(msg_id)
            if cached is not None:
                out.append((peer, cached))  # replay; same msg_id, same bytes
        for msg in messages:
            out.extend(self.handle_message(peer, msg))
        return out

    def handle_message(self, peer, msg: Message) -> list[tuple[object, Message]]:
        self.register_peer(peer)
        cached = self._responses.get(peer, {}).get(msg.msg_id)
        if cached is not None:
            return [(peer, cached)]

        try:
            response, event = self._dispatch(msg)
        except AveSceneError as exc:
            response, event = self._err(msg, str(exc)), None
        except Exception as exc:  # hostile input must never kill the server
            logger.exception("unexpected error handling %s", MSG_NAMES.get(msg.msg_type))
            response, event = self._err(msg, f"internal error: {exc}"), None

        out: list[tuple[object, Message]] = []
        if response is not None:
            if msg.msg_type in _REQUEST_TYPES:
                cache = self._responses.setdefault(peer, OrderedDict())
                cache[msg.msg_id] = response
                while len(cache) > DEDUPE_WINDOW:
                    cache.popitem(last=False)
            out.append((peer, response))
        if event is not None:
            for other in sorted(self.peers, key=repr):
                out.append((other, event))
        return out

    def _dispatch(self, msg: Message) -> tuple[Message | None, Message | None]:
        scene = self.owner.scene
        if msg.msg_type == MSG_HELLO:
            return self._ack(msg, scene.revision), None
        if msg.msg_type == MSG_GET_SCENE:
            body = {"ack_for": msg.msg_id, "scene": scenemod.scene_to_dict(scene)}
            return make_message(MSG_SCENE_SNAPSHOT, body, msg_id=self._next_id()), None
        if msg.msg_type in (MSG_SET_POSE, MSG_ADD_IMAGE, MSG_ADD_DETECTIONS):
            mutation = mutation_from_message(msg.msg_type, msg.json())
            revision, summary = self.owner.commit(mutation)
            event = make_message(
                MSG_SCENE_EVENT,
                {"revision": revision, "mutation": summary},
                msg_id=self._next_id(),
            )
            return self._ack(msg, revision), event
        return self._err(msg, f"unknown msg_type {msg.msg_type}"), None

    def _ack(self, msg: Message, revision: int) -> Message:
        return make_message(
            MSG_ACK, {"ack_for": msg.msg_id, "revision": revision}, msg_id=self._next_id()
        )

    def _err(self, msg: Message, error: str) -> Message:
        return make_message(
            MSG_ERR, {"ack_for": msg.msg_id, "error": error}, msg_id=self._next_id()
        )


class DatagramClient:
    """Blocking UDP client with retry-until-ACK semantics.

    Used by tests and scripts; the browser viewer speaks the websocket
    bridge instead. SCENE_EVENT broadcasts received while waiting are
    buffered in `events`.
    """

    def __init__(self, host: str, port: int, timeout: float = 0.5, retries: int = 10):
        import socket

        self.addr = (host, port)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.settimeout(timeout)
        self.timeout = timeout
        self.retries = retries
        self._msg_ids = itertools.count(1)
        self.reassembler = Reassembler()
        self.events: list[dict] = []

    def close(self) -> None:
        self.sock.close()

    def request(self, msg_type: int, body: dict | None = None) -> Message:
        msg = make_message(msg_type, body, msg_id=next(self._msg_ids))
        datagrams = encode_datagrams(msg)
        for _ in range(self.retries):
            for d in datagrams:
                self.sock.sendto(d, self.addr)
            deadline = time.monotonic() + self.timeout
            while time.monotonic() < deadline:
                try:
                    data, _ = self.sock.recvfrom(65536)
                except OSError:
                    break
                completed, _ = self.reassembler.feed(data)
                for m in completed:
                    doc = m.json()
                    if m.msg_type == MSG_SCENE_EVENT:
                        self.events.append(doc)
                        continue
                    if doc.get("ack_for") == msg.msg_id:
                        return m
        raise TimeoutError(
            f"no response to {MSG_NAMES.get(msg_type)} after {self.retries} retries"
        )

    def drain_events(self, duration: float = 0.2) -> list[dict]:
        deadline = time.monotonic() + duration
        while time.monotonic() < deadline:
            try:
                data, _ = self.sock.recvfrom(65536)
            except OSError:
                continue
            completed, _ = self.reassembler.feed(data)
            for m in completed:
                if m.msg_type == MSG_SCENE_EVENT:
                    self.events.append(m.json())
        return self.events
