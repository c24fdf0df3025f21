"""Run the real server (UDP + websocket bridge) on loopback for tests."""

from __future__ import annotations

import asyncio
import re
import threading

from avescene.protocol import SceneOwner, ServerCore
from avescene.server import run_async


class ServerHarness:
    """Spins the asyncio server up in a thread on ephemeral ports."""

    def __init__(self, scene, assets_dir=None):
        self.core = ServerCore(SceneOwner(scene))
        self.assets_dir = assets_dir
        self.udp_port = None
        self.ws_port = None
        self._ready = threading.Event()
        self._loop = None
        self._main = None
        self._thread = None

    def _announce(self, line, flush=True):
        m = re.match(r"listening udp=(\d+) ws=(\d+)", line)
        if m:
            self.udp_port = int(m.group(1))
            self.ws_port = int(m.group(2))
            self._ready.set()

    def __enter__(self):
        def runner():
            self._loop = asyncio.new_event_loop()
            asyncio.set_event_loop(self._loop)
            self._main = self._loop.create_task(
                run_async(
                    self.core,
                    udp_port=0,
                    ws_port=0,
                    assets_dir=self.assets_dir,
                    announce=self._announce,
                )
            )
            self._main.add_done_callback(lambda _: self._loop.stop())
            try:
                self._loop.run_forever()
            finally:
                self._loop.close()

        self._thread = threading.Thread(target=runner, daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=10):
            raise RuntimeError("server did not start")
        return self

    def __exit__(self, *exc):
        self._loop.call_soon_threadsafe(self._main.cancel)
        self._thread.join(timeout=10)
        return False
