"""WebSocket service streaming simulator state and accepting operator input.

Wire format: one JSON text frame per message with envelope
{"topic", "seq", "stamp_ms", "data"}. Outbound topics are robot_odom_<id>
(per agent, plus robot_odom_pc for the migration point), static_occupancy,
mpl_path, and final_goal; inbound topics are take_control, user_target, and
(from the control owner) final_goal edits. The reserved topic "error"
carries rejection replies for malformed input. seq is per client per topic
and gapless from the connect-time snapshot onward; a queue overflow clears
the client's occupancy backlog and re-sends a full snapshot whose first
message carries "resnapshot": true.

New connections receive a snapshot burst of ordinary messages (odometry,
goal, current path, and the full known occupancy in batches of at most 500
voxels), so clients never special-case catch-up. The server listens on
ws://host:port/stream and serves static console assets on every other path
when a directory is configured.

The service runs an asyncio loop on its own thread. The sim thread hands
per-tick records over with call_soon_threadsafe; inbound commands reach the
sim through its thread-safe submit queue, so neither side shares mutable
state.
"""

from __future__ import annotations

import asyncio
import json
import math
import mimetypes
import threading
from collections import defaultdict, deque
from pathlib import Path

import numpy as np

from .core import as_vec3
from .engine import OperatorInput, SimWorld, path_payload

OCCUPANCY_BATCH = 500   # voxels per static_occupancy message
QUEUE_LIMIT = 1024      # per-client outbound backlog before resnapshot
ODOM_PERIOD = 0.05      # odometry decimation period, s (20 Hz)

FIXED_TOPICS = {"static_occupancy", "final_goal", "mpl_path", "take_control",
                "user_target", "error"}


def valid_topic(name: str) -> bool:
    return name in FIXED_TOPICS or name.startswith("robot_odom_")


class SimAdapter:
    """What the bridge needs from a live simulation."""

    def __init__(self, sim: SimWorld):
        self.sim = sim

    def grid(self) -> dict:
        return {"resolution": self.sim.scenario.sim.resolution,
                "origin": [0.0, 0.0, 0.0]}

    def stamp_ms(self) -> int:
        return int(round(self.sim.clock.time * 1000))

    def current_tick(self) -> int:
        return self.sim.clock.tick

    def barycenter(self) -> list:
        return list(self.sim.team.barycenter_position)

    def snapshot(self) -> dict:
        sim = self.sim
        return {
            "agents": [{"id": a.id, "p": list(a.position), "v": list(a.velocity),
                        "p_cmd": list(a.commanded_position)}
                       for a in sim.agents],
            "pc": {"p": list(sim.adm_state.p_c), "v": list(sim.adm_state.v_c)},
            "goal": {"p": list(sim.scenario.goal),
                     "tolerance": sim.scenario.sim.goal_tolerance},
            "path": path_payload(sim.path) if sim.path is not None else None,
            "occupied": sorted(list(k) for k in sim.known.occupied),
        }

    def submit(self, inp: OperatorInput, tick: int) -> None:
        self.sim.submit_operator(inp, tick)

    def set_goal(self, p) -> bool:
        self.sim.scenario.goal = as_vec3(p)
        return True


class _Client:
    def __init__(self, ws):
        self.ws = ws
        self.queue: deque = deque()
        self.wake = asyncio.Event()
        self.seq: dict[str, int] = defaultdict(int)
        self.occ_cursor = 0
        self.flag_resnapshot = False  # mark the next outgoing message
        self.last_target: tuple[float, np.ndarray] | None = None


class Bridge:
    """Background WebSocket server bound to one tick source."""

    def __init__(self, source, host: str = "127.0.0.1", port: int = 9001,
                 static_dir: str | None = None):
        if isinstance(source, SimWorld):
            source = SimAdapter(source)
        self.source = source
        self.host = host
        self.port = port
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        self.loop: asyncio.AbstractEventLoop | None = None
        self.clients: dict = {}
        self.control_owner: _Client | None = None
        self._discovery_log: list[list[int]] = []
        self._thread: threading.Thread | None = None
        self._stop_event: asyncio.Event | None = None
        self._last_odom_time: float | None = None

    # ---- lifecycle -------------------------------------------------------

    def start(self, timeout: float = 10.0) -> None:
        import concurrent.futures
        ready: concurrent.futures.Future = concurrent.futures.Future()
        self._thread = threading.Thread(target=self._run, args=(ready,),
                                        daemon=True, name="bridge")
        self._thread.start()
        ready.result(timeout)  # surfaces bind errors (port busy) to the caller

    def _run(self, ready) -> None:
        from websockets.asyncio.server import serve

        loop = asyncio.new_event_loop()
        asyncio.set_event_loop(loop)
        self.loop = loop
        self._stop_event = asyncio.Event()

        async def main():
            try:
                server = await serve(self._handler, self.host, self.port,
                                     process_request=self._process_request)
            except OSError as exc:
                ready.set_exception(exc)
                return
            self._discovery_log = [list(k)
                                   for k in self.source.snapshot()["occupied"]]
            ready.set_result(None)
            await self._stop_event.wait()
            server.close()
            await server.wait_closed()

        loop.run_until_complete(main())
        loop.close()

    def stop(self) -> None:
        if self.loop is not None and self._stop_event is not None:
            self.loop.call_soon_threadsafe(self._stop_event.set)
        if self._thread is not None:
            self._thread.join(timeout=10.0)

    @property
    def url(self) -> str:
        return f"ws://{self.host}:{self.port}/stream"

    @property
    def has_owner(self) -> bool:
        return self.control_owner is not None

    # ---- sim-thread entry point --------------------------------------------

    def feed(self, record: dict) -> None:
        """Hand one tick record to the service (callable from any thread)."""
        if self.loop is not None:
            self.loop.call_soon_threadsafe(self._on_record, record)

    def attach(self, sim: SimWorld) -> None:
        sim.tick_listeners.append(self.feed)

    # ---- outbound ----------------------------------------------------------

    def _envelope(self, client: _Client, topic: str, data, stamp_ms: int) -> dict:
        env = {"topic": topic, "seq": client.seq[topic], "stamp_ms": stamp_ms,
               "data": data}
        client.seq[topic] += 1
        if client.flag_resnapshot:
            env["resnapshot"] = True
            client.flag_resnapshot = False
        return env

    def _enqueue(self, client: _Client, topic: str, data, stamp_ms: int,
                 unbounded: bool = False) -> None:
        if not unbounded and len(client.queue) >= QUEUE_LIMIT:
            self._overflow(client, stamp_ms)
        client.queue.append(self._envelope(client, topic, data, stamp_ms))
        client.wake.set()

    def _overflow(self, client: _Client, stamp_ms: int) -> None:
        # Shed occupancy backlog first, keep a tail of everything else, then
        # start over from a clean snapshot so the client's map converges
        # despite the dropped deltas.
        kept = [env for env in client.queue
                if env["topic"] != "static_occupancy"]
        client.queue.clear()
        client.queue.extend(kept[-(QUEUE_LIMIT // 2):])
        client.flag_resnapshot = True
        client.occ_cursor = 0
        self._send_snapshot(client, stamp_ms)

    def _enqueue_occupancy(self, client: _Client, stamp_ms: int) -> None:
        grid = self.source.grid()
        log = self._discovery_log
        while client.occ_cursor < len(log):
            batch = log[client.occ_cursor:client.occ_cursor + OCCUPANCY_BATCH]
            client.occ_cursor += len(batch)
            self._enqueue(client, "static_occupancy",
                          {"resolution": grid["resolution"],
                           "origin": grid["origin"], "keys": batch},
                          stamp_ms, unbounded=True)

    def _send_snapshot(self, client: _Client, stamp_ms: int | None = None) -> None:
        snap = self.source.snapshot()
        stamp = self.source.stamp_ms() if stamp_ms is None else stamp_ms
        self._enqueue(client, "final_goal", snap["goal"], stamp, unbounded=True)
        for agent in snap["agents"]:
            self._enqueue(client, f"robot_odom_{agent['id']}", agent, stamp,
                          unbounded=True)
        self._enqueue(client, "robot_odom_pc", snap["pc"], stamp, unbounded=True)
        if snap["path"] is not None:
            self._enqueue(client, "mpl_path", snap["path"], stamp, unbounded=True)
        self._enqueue_occupancy(client, stamp)

    def _odometry_due(self, t: float) -> bool:
        if self._last_odom_time is None:
            return True
        return math.floor(t / ODOM_PERIOD + 1e-9) > math.floor(
            self._last_odom_time / ODOM_PERIOD + 1e-9)

    def _on_record(self, record: dict) -> None:
        self._discovery_log.extend(record["new_voxels"])
        stamp = int(round(record["t"] * 1000))
        odom_due = self._odometry_due(record["t"])
        for client in self.clients.values():
            self._enqueue_occupancy(client, stamp)
            if record["replanned"] and "path" in record:
                self._enqueue(client, "mpl_path", record["path"], stamp)
            if odom_due:
                for agent in record["agents"]:
                    self._enqueue(client, f"robot_odom_{agent['id']}",
                                  {"id": agent["id"], "p": agent["p"],
                                   "v": agent["v"], "p_cmd": agent["p_cmd"]},
                                  stamp)
                self._enqueue(client, "robot_odom_pc",
                              {"p": record["p_c"], "v": record["v_c"]}, stamp)
        if odom_due:
            self._last_odom_time = record["t"]

    async def _sender(self, client: _Client) -> None:
        while True:
            await client.wake.wait()
            client.wake.clear()
            while client.queue:
                env = client.queue.popleft()
                await client.ws.send(json.dumps(env, sort_keys=True))

    # ---- inbound -----------------------------------------------------------

    def _reply(self, client: _Client, topic: str, data) -> None:
        self._enqueue(client, topic, data, self.source.stamp_ms())

    def _error(self, client: _Client, message: str) -> None:
        self._reply(client, "error", {"message": message})

    def _handle_inbound(self, client: _Client, raw) -> None:
        try:
            msg = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._error(client, "message is not valid JSON")
            return
        if not isinstance(msg, dict) or "topic" not in msg or "data" not in msg:
            self._error(client, "expected envelope with 'topic' and 'data'")
            return
        topic, data = msg["topic"], msg["data"]
        if topic == "take_control":
            self._handle_take_control(client, data)
        elif topic == "user_target":
            self._handle_user_target(client, data)
        elif topic == "final_goal":
            self._handle_goal_edit(client, data)
        else:
            self._error(client, f"unknown inbound topic: {topic!r}")

    def _release(self, client: _Client) -> None:
        if self.control_owner is client:
            self.control_owner = None
            client.last_target = None
            p_bar = np.array(self.source.barycenter(), dtype=np.float64)
            self.source.submit(OperatorInput(p_bar, np.zeros(3), False, "live"),
                               self.source.current_tick())

    def _handle_take_control(self, client: _Client, data) -> None:
        take = data.get("take") if isinstance(data, dict) else data
        if not isinstance(take, bool):
            self._error(client, "take_control data must be a boolean")
            return
        if take:
            if self.control_owner is not None and self.control_owner is not client:
                self._reply(client, "take_control",
                            {"granted": False,
                             "reason": "control owned by another client"})
                return
            self.control_owner = client
            p_bar = np.array(self.source.barycenter(), dtype=np.float64)
            self.source.submit(OperatorInput(p_bar, np.zeros(3), True, "live"),
                               self.source.current_tick())
            self._reply(client, "take_control", {"granted": True})
        else:
            self._release(client)
            self._reply(client, "take_control", {"granted": False,
                                                 "released": True})

    def _handle_user_target(self, client: _Client, data) -> None:
        if self.control_owner is not client:
            return  # only the owner steers; everyone else is ignored
        if not isinstance(data, dict) or "p" not in data:
            self._error(client, "user_target data must contain 'p'")
            return
        p = data["p"]
        if (not isinstance(p, (list, tuple)) or len(p) != 3
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool)
                           for c in p)):
            self._error(client, "user_target 'p' must be [x, y, z]")
            return
        p = np.array(p, dtype=np.float64)
        if not np.all(np.isfinite(p)):
            self._error(client, "user_target 'p' must be finite")
            return
        now = self.source.stamp_ms() / 1000.0
        v = np.zeros(3)
        if client.last_target is not None:
            t_prev, p_prev = client.last_target
            if now > t_prev:
                v = (p - p_prev) / (now - t_prev)
        client.last_target = (now, p)
        self.source.submit(OperatorInput(p, v, True, "live"),
                           self.source.current_tick())

    def _handle_goal_edit(self, client: _Client, data) -> None:
        if self.control_owner is not client:
            self._error(client, "goal edits require control ownership")
            return
        if not isinstance(data, dict) or "p" not in data:
            self._error(client, "final_goal data must contain 'p'")
            return
        try:
            accepted = self.source.set_goal(np.array(data["p"], dtype=np.float64))
        except (ValueError, TypeError):
            self._error(client, "final_goal 'p' must be [x, y, z]")
            return
        if not accepted:
            self._error(client, "goal edits are not available in this session")
            return
        stamp = self.source.stamp_ms()
        goal = self.source.snapshot()["goal"]
        for other in self.clients.values():
            self._enqueue(other, "final_goal", goal, stamp)

    # ---- connection plumbing -------------------------------------------------

    async def _handler(self, ws) -> None:
        from websockets.exceptions import ConnectionClosed

        client = _Client(ws)
        self.clients[id(ws)] = client
        sender = asyncio.get_running_loop().create_task(self._sender(client))
        try:
            self._send_snapshot(client)
            async for raw in ws:
                self._handle_inbound(client, raw)
        except ConnectionClosed:
            pass
        finally:
            sender.cancel()
            self.clients.pop(id(ws), None)
            self._release(client)

    def _process_request(self, connection, request):
        from websockets.datastructures import Headers
        from websockets.http11 import Response

        path = request.path.split("?", 1)[0]
        upgrade = request.headers.get("Upgrade", "").lower()
        if upgrade == "websocket":
            if path == "/stream":
                return None  # proceed with the handshake
            return connection.respond(404, "WebSocket endpoint is /stream\n")
        if self.static_dir is None:
            return connection.respond(404, "no static assets configured\n")
        rel = path.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir)) or not target.is_file():
            return connection.respond(404, "not found\n")
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        body = target.read_bytes()
        headers = Headers([("Content-Type", ctype),
                           ("Content-Length", str(len(body)))])
        return Response(200, "OK", headers, body)
