import asyncio
import json
import logging
import threading
import uuid

from asgiref.sync import sync_to_async
from channels.generic.websocket import AsyncWebsocketConsumer
from django.utils import timezone

from .exceptions import RcmError, RunCancelled
from .machines import load_machine
from .recursive_tm import RUN, FrameEncoding, MemoStore, RecursiveTmGenerator, frame_value
from .runtime import RunConfig, run
from .sat import default_config, parse_dimacs, solve

logger = logging.getLogger(__name__)

# engines stop here regardless of what a client asks for
MAX_STREAMED_STEPS = 200_000


class RunConsumer(AsyncWebsocketConsumer):
    """
    WebSocket consumer streaming context-stack runs.
    A client sends one request per run and receives a ``step`` frame for every
    generator invocation followed by a single ``result`` frame.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.connection_id = None
        self.task = None
        self.stopped = threading.Event()

    async def connect(self):
        await self.accept()
        self.connection_id = str(uuid.uuid4())
        await self.send_json({
            "type": "connected",
            "connection_id": self.connection_id,
            "status": "success",
        })
        logger.info("Run stream connected: %s", self.connection_id)

    async def disconnect(self, close_code):
        self.stopped.set()
        if self.task is not None and not self.task.done():
            self.task.cancel()
        logger.info("Run stream disconnected: %s (%s)", self.connection_id, close_code)

    async def receive(self, text_data):
        try:
            data = json.loads(text_data)
        except json.JSONDecodeError:
            await self.send_error("Invalid JSON format", None)
            return

        request_id = data.get('request_id')
        if not request_id or not self.is_valid_uuid(request_id):
            await self.send_error("Invalid or missing request_id", None)
            return

        message_type = data.get('type')
        if message_type == 'solve':
            await self.handle_solve(data, request_id)
        elif message_type == 'tm':
            await self.handle_tm(data, request_id)
        elif message_type == 'ping':
            await self.send_json({"type": "pong", "request_id": request_id})
        else:
            await self.send_error(f"Unknown message type: {message_type}", request_id)

    @staticmethod
    def is_valid_uuid(value):
        try:
            uuid.UUID(str(value))
            return True
        except ValueError:
            return False

    async def handle_solve(self, data, request_id):
        dimacs = data.get('dimacs')
        if not dimacs:
            await self.send_error("Missing dimacs", request_id)
            return
        try:
            formula = parse_dimacs(dimacs)
        except RcmError as exc:
            await self.send_error(str(exc), request_id)
            return
        try:
            cfg = default_config(max_steps=min(int(data.get('max_steps', MAX_STREAMED_STEPS)), MAX_STREAMED_STEPS))
        except (TypeError, ValueError) as exc:
            await self.send_error(f"Invalid max_steps: {exc}", request_id)
            return

        def work(on_step):
            outcome = solve(formula, cfg, on_step=on_step)
            return {"verdict": outcome.verdict, "outcome": outcome.result.describe(),
                    "trace": outcome.trace.record()}

        await self.stream(work, request_id)

    async def handle_tm(self, data, request_id):
        try:
            tm = load_machine(str(data.get('machine', '')))
        except RcmError as exc:
            await self.send_error(str(exc), request_id)
            return
        x = tuple(str(data.get('input', '')))
        cfg = RunConfig(max_steps=MAX_STREAMED_STEPS)

        def work(on_step):
            generator = RecursiveTmGenerator(tm, MemoStore() if data.get('memo') else None)
            result = run(FrameEncoding(RUN, x, 0).tokens(), generator, cfg, on_step)
            value = frame_value(result)
            verdict = {("1",): "accept", ("0",): "reject"}.get(value)
            return {"verdict": verdict, "outcome": result.describe(), "trace": result.trace.record()}

        await self.stream(work, request_id)

    async def stream(self, work, request_id):
        """Run ``work`` in a worker thread and forward its step events as they happen"""
        loop = asyncio.get_running_loop()
        queue = asyncio.Queue()

        def on_step(event):
            if self.stopped.is_set():
                raise RunCancelled(f"client {self.connection_id} disconnected")
            loop.call_soon_threadsafe(queue.put_nowait, event)

        task = self.task = asyncio.ensure_future(sync_to_async(work, thread_sensitive=False)(on_step))
        while not task.done():
            getter = asyncio.ensure_future(queue.get())
            done, _ = await asyncio.wait({getter, task}, return_when=asyncio.FIRST_COMPLETED)
            if getter in done:
                await self.send_step(getter.result(), request_id)
            else:
                getter.cancel()
        while not queue.empty():
            await self.send_step(queue.get_nowait(), request_id)

        try:
            payload = task.result()
        except asyncio.CancelledError:
            logger.info("Streamed run %s cancelled", request_id)
            return
        except RcmError as exc:
            await self.send_error(str(exc), request_id)
            return
        except Exception as exc:
            logger.exception("Streamed run %s failed", request_id)
            await self.send_error(f"Run failed: {exc}", request_id)
            return
        finally:
            self.task = None
        await self.send_json({"type": "result", "request_id": request_id,
                              "timestamp": timezone.now().isoformat(), **payload})

    async def send_step(self, event, request_id):
        await self.send_json({
            "type": "step", "request_id": request_id, "step": event.step,
            "depth": event.depth, "kind": event.kind.value, "ls": event.ls, "gs": event.gs,
        })

    async def send_json(self, content):
        await self.send(text_data=json.dumps(content))

    async def send_error(self, error_message, request_id):
        error_data = {
            "type": "error",
            "error": error_message,
            "timestamp": timezone.now().isoformat()
        }
        if request_id:
            error_data["request_id"] = request_id
        await self.send_json(error_data)
