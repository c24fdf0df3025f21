"""asyncio runtime: UDP endpoint, websocket bridge, static viewer assets.

One event loop hosts everything, so the SceneOwner has exactly one writer
by construction. The websocket bridge carries whole messages as JSON text
(`{"msg_id": n, "msg_type": t, "body": {...}}`, no fragmentation needed
on a stream); both transports share the ServerCore, so a mutation from
either side is broadcast to every connected peer.

The websocket port doubles as a plain HTTP server for the browser
viewer's static files and for photo textures (`/images/<image_id>`),
which browsers cannot read from local paths.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
import mimetypes
from http import HTTPStatus
from pathlib import Path

from websockets.asyncio.server import serve as ws_serve
from websockets.datastructures import Headers
from websockets.http11 import Response

from .protocol import (
    MSG_NAMES,
    Message,
    ServerCore,
    encode_datagrams,
    make_message,
)
from .scene import images_by_id

logger = logging.getLogger(__name__)

DEFAULT_UDP_PORT = 47701
DEFAULT_WS_PORT = 47702


def message_to_ws_json(msg: Message) -> str:
    # splice the canonical body verbatim so snapshot bytes are identical
    # on the stream and datagram paths
    body_text = msg.body.decode("ascii") if msg.body else "{}"
    return f'{{"body":{body_text},"msg_id":{msg.msg_id},"msg_type":{msg.msg_type}}}'


def message_from_ws_json(raw: str | bytes) -> Message:
    doc = json.loads(raw)
    if not isinstance(doc, dict):
        raise ValueError("websocket message must be a JSON object")
    return make_message(
        int(doc.get("msg_type", 0)),
        doc.get("body") or {},
        msg_id=int(doc.get("msg_id", 0)),
    )


class Router:
    """Delivers ServerCore outputs to whichever transport owns each peer."""

    def __init__(self, core: ServerCore):
        self.core = core
        self.udp_transport = None
        self.ws_queues: dict[object, asyncio.Queue] = {}

    def route(self, outputs: list[tuple[object, Message]]) -> None:
        for peer, message in outputs:
            kind = peer[0]
            if kind == "udp" and self.udp_transport is not None:
                for datagram in encode_datagrams(message):
                    self.udp_transport.sendto(datagram, peer[1])
            elif kind == "ws":
                queue = self.ws_queues.get(peer)
                if queue is not None:
                    queue.put_nowait(message_to_ws_json(message))


class _UdpProtocol(asyncio.DatagramProtocol):
    def __init__(self, router: Router):
        self.router = router

    def connection_made(self, transport):
        self.router.udp_transport = transport

    def datagram_received(self, data, addr):
        try:
            outputs = self.router.core.handle_datagram(("udp", addr), data)
        except Exception:
            logger.exception("datagram handling failed")
            return
        self.router.route(outputs)


def _static_responder(assets_dir: Path | None, core: ServerCore):
    def respond(connection, request):
        if "Upgrade" in request.headers:
            return None  # let the websocket handshake proceed
        path = request.path.split("?", 1)[0]
        if path.startswith("/images/"):
            image_id = path[len("/images/"):]
            image = images_by_id(core.owner.scene).get(image_id)
            if image is not None and Path(image.source_path).is_file():
                return _file_response(Path(image.source_path))
            return _plain(HTTPStatus.NOT_FOUND, f"no image {image_id!r}\n")
        if assets_dir is None:
            return _plain(HTTPStatus.NOT_FOUND, "no viewer assets configured\n")
        rel = "index.html" if path in ("", "/") else path.lstrip("/")
        target = (assets_dir / rel).resolve()
        if not str(target).startswith(str(assets_dir.resolve())) or not target.is_file():
            return _plain(HTTPStatus.NOT_FOUND, f"not found: {path}\n")
        return _file_response(target)

    return respond


def _plain(status: HTTPStatus, text: str) -> Response:
    body = text.encode()
    headers = Headers(
        [("Content-Type", "text/plain"), ("Content-Length", str(len(body)))]
    )
    return Response(status.value, status.phrase, headers, body)


def _file_response(path: Path) -> Response:
    body = path.read_bytes()
    mime = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
    headers = Headers(
        [
            ("Content-Type", mime),
            ("Content-Length", str(len(body))),
            ("Cache-Control", "no-cache"),
        ]
    )
    return Response(HTTPStatus.OK.value, HTTPStatus.OK.phrase, headers, body)


async def _ws_writer(connection, queue: asyncio.Queue):
    while True:
        text = await queue.get()
        await connection.send(text)


def _ws_handler(router: Router, peer_ids=itertools.count(1)):
    async def handler(connection):
        peer = ("ws", next(peer_ids))
        queue: asyncio.Queue = asyncio.Queue()
        router.ws_queues[peer] = queue
        router.core.register_peer(peer)
        writer = asyncio.create_task(_ws_writer(connection, queue))
        try:
            async for raw in connection:
                try:
                    msg = message_from_ws_json(raw)
                except (ValueError, TypeError) as exc:
                    queue.put_nowait(
                        message_to_ws_json(
                            make_message(3, {"ack_for": 0, "error": f"bad message: {exc}"})
                        )
                    )
                    continue
                outputs = router.core.handle_message(peer, msg)
                router.route(outputs)
        finally:
            writer.cancel()
            router.ws_queues.pop(peer, None)
            router.core.drop_peer(peer)

    return handler


async def run_async(
    core: ServerCore,
    host: str = "127.0.0.1",
    udp_port: int = DEFAULT_UDP_PORT,
    ws_port: int = DEFAULT_WS_PORT,
    assets_dir: Path | None = None,
    ready: asyncio.Event | None = None,
    announce=print,
):
    loop = asyncio.get_running_loop()
    router = Router(core)

    transport, _ = await loop.create_datagram_endpoint(
        lambda: _UdpProtocol(router), local_addr=(host, udp_port)
    )
    actual_udp = transport.get_extra_info("sockname")[1]

    async with ws_serve(
        _ws_handler(router),
        host,
        ws_port,
        process_request=_static_responder(assets_dir, core),
    ) as server:
        actual_ws = next(iter(server.sockets)).getsockname()[1]
        announce(f"listening udp={actual_udp} ws={actual_ws}", flush=True)
        if ready is not None:
            ready.set()
        try:
            await asyncio.Future()
        finally:
            transport.close()


def run_server(
    core: ServerCore,
    host: str = "127.0.0.1",
    udp_port: int = DEFAULT_UDP_PORT,
    ws_port: int = DEFAULT_WS_PORT,
    assets_dir: Path | None = None,
):
    """Blocking entry point; returns on KeyboardInterrupt."""
    try:
        asyncio.run(
            run_async(core, host=host, udp_port=udp_port, ws_port=ws_port, assets_dir=assets_dir)
        )
    except KeyboardInterrupt:
        print("shutting down")
