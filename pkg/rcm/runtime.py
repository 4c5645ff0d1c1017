"""
Context-stack machine.

A run keeps a non-empty stack of token frames. At each step the generator sees
the active frame (optionally behind the root prompt), emits a continuation, and
the transition rule pushes, pops or extends frames depending on the block the
continuation ends with.
"""
import csv
import hashlib
import io
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from django.conf import settings

from .exceptions import FrameParseError
from .tokens import (
    CALL_CLOSE, CALL_OPEN, RET_CLOSE, RET_OPEN, Tokens, render_tokens, tokenize,
)

logger = logging.getLogger(__name__)

Generator = Callable[[Tokens], Sequence[str]]

# markers that may never appear inside a block payload
_PAYLOAD_FORBIDDEN = frozenset({CALL_CLOSE, RET_OPEN, RET_CLOSE})


class Kind(str, Enum):
    CALL = "call"
    RETURN = "return"
    PLAIN = "plain"


class BottomReason(str, Enum):
    LOOP_DETECTED = "loop_detected"
    LIMIT_EXCEEDED = "limit_exceeded"
    MALFORMED_OUTPUT = "malformed_output"


class Limit(str, Enum):
    LOCAL_SPACE = "local_space"
    DEPTH = "depth"
    STEPS = "steps"


@dataclass(frozen=True)
class GeneratorOutput:
    kind: Kind
    prefix: Tokens
    payload: Tokens = ()


@dataclass(frozen=True)
class ContextStack:
    frames: Tuple[Tokens, ...]

    def __post_init__(self):
        if not self.frames:
            raise ValueError("context stack must hold at least one frame")

    @classmethod
    def initial(cls, prompt: Sequence[str]) -> "ContextStack":
        return cls((tuple(prompt),))

    @property
    def depth(self) -> int:
        return len(self.frames)

    @property
    def active(self) -> Tokens:
        return self.frames[-1]

    def fingerprint(self) -> bytes:
        # matches are confirmed by full comparison in detect_loop
        digest = hashlib.blake2b(digest_size=16)
        for frame in self.frames:
            digest.update("\x1f".join(frame).encode("utf-8"))
            digest.update(b"\x1e")
        return digest.digest()


@dataclass(frozen=True)
class RunConfig:
    prompt_prefixing: bool = False
    question_preservation: bool = False
    max_local_space: int = 2 ** 16
    max_depth: int = 10 ** 4
    max_steps: int = 10 ** 6
    loop_detection: bool = True
    record_steps: bool = False
    # question-preservation rendering around a returned answer
    answer_prefix: str = ". The answer is: "
    answer_suffix: str = ".\n"

    def __post_init__(self):
        for name in ("max_local_space", "max_depth", "max_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def from_settings(cls, **overrides) -> "RunConfig":
        values = {
            "max_local_space": settings.RCM_MAX_LOCAL_SPACE,
            "max_depth": settings.RCM_MAX_DEPTH,
            "max_steps": settings.RCM_MAX_STEPS,
            "loop_detection": settings.RCM_LOOP_DETECTION,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class ResourceTrace:
    max_local_space: int = 0
    max_global_space: int = 0
    max_depth: int = 0
    total_steps: int = 0
    total_tokens_emitted: int = 0
    per_step_log: Optional[List[Tuple[int, int, int]]] = None

    def observe(self, frames: Sequence[Tokens]):
        gs, ls = _measure_frames(frames)
        self.max_local_space = max(self.max_local_space, ls)
        self.max_global_space = max(self.max_global_space, gs)
        self.max_depth = max(self.max_depth, len(frames))
        return gs, ls

    def record(self) -> str:
        return (
            f"max_ls={self.max_local_space} max_gs={self.max_global_space} "
            f"max_depth={self.max_depth} total_steps={self.total_steps} "
            f"total_tokens={self.total_tokens_emitted}"
        )

    def step_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["step", "depth", "ls", "gs"])
        for index, (depth, ls, gs) in enumerate(self.per_step_log or [], start=1):
            writer.writerow([index, depth, ls, gs])
        return out.getvalue()


@dataclass(frozen=True)
class Answer:
    tokens: Tokens

    @property
    def text(self) -> str:
        return render_tokens(self.tokens)


@dataclass(frozen=True)
class Bottom:
    reason: BottomReason
    limit: Optional[Limit] = None
    detail: str = ""


@dataclass
class RunResult:
    outcome: object
    trace: ResourceTrace

    @property
    def is_answer(self) -> bool:
        return isinstance(self.outcome, Answer)

    @property
    def answer_text(self) -> Optional[str]:
        return self.outcome.text if self.is_answer else None

    def describe(self) -> str:
        if self.is_answer:
            return self.outcome.text
        if self.outcome.limit is not None:
            return f"bottom:{self.outcome.reason.value}:{self.outcome.limit.value}"
        return f"bottom:{self.outcome.reason.value}"


@dataclass(frozen=True)
class StepEvent:
    """One generator invocation as seen by ``on_step`` observers"""
    step: int
    depth: int
    frame: Tokens
    emitted: Tokens
    kind: Kind
    ls: int
    gs: int


def classify_output(y: Sequence[str]) -> GeneratorOutput:
    y = tuple(y)
    if not y or y[-1] not in (CALL_CLOSE, RET_CLOSE):
        return GeneratorOutput(Kind.PLAIN, y)
    if y[-1] == CALL_CLOSE:
        kind, opener = Kind.CALL, CALL_OPEN
    else:
        kind, opener = Kind.RETURN, RET_OPEN

    start = None
    for index in range(len(y) - 2, -1, -1):
        if y[index] == opener:
            start = index
            break
    if start is None:
        return GeneratorOutput(Kind.PLAIN, y)

    payload = y[start + 1:-1]
    if any(token in _PAYLOAD_FORBIDDEN for token in payload):
        return GeneratorOutput(Kind.PLAIN, y)
    return GeneratorOutput(kind, y[:start], payload)


def answer_rendering(payload: Tokens, cfg: RunConfig) -> Tokens:
    if not cfg.question_preservation:
        return payload
    return tokenize(cfg.answer_prefix) + payload + tokenize(cfg.answer_suffix)


def apply_transition(stack: ContextStack, out: GeneratorOutput, cfg: RunConfig) -> ContextStack:
    frames = stack.frames
    if out.kind is Kind.CALL:
        parent = out.prefix + out.payload if cfg.question_preservation else out.prefix
        return ContextStack(frames[:-1] + (parent, out.payload))
    if out.kind is Kind.RETURN:
        if stack.depth < 2:
            raise ValueError("a return at depth 1 terminates the run; there is no parent frame")
        parent = frames[-2] + answer_rendering(out.payload, cfg)
        return ContextStack(frames[:-2] + (parent,))
    return ContextStack(frames[:-1] + (out.prefix,))


def _measure_frames(frames: Sequence[Tokens]) -> Tuple[int, int]:
    lengths = [len(frame) for frame in frames]
    return sum(lengths), max(lengths)


def measure(stack: ContextStack) -> Tuple[int, int]:
    """Return (global space, local space) of a stack"""
    return _measure_frames(stack.frames)


def detect_loop(history: Dict[bytes, List[Tuple[Tokens, ...]]], stack: ContextStack) -> bool:
    """Record ``stack`` in ``history``; True iff the exact same state was recorded before."""
    key = stack.fingerprint()
    seen = history.setdefault(key, [])
    if stack.frames in seen:
        return True
    seen.append(stack.frames)
    return False


class StackMachine:
    """Mutable state of a single run; ``step`` performs one generator invocation."""

    def __init__(self, prompt: Sequence[str], generate: Generator, cfg: RunConfig,
                 on_step: Optional[Callable[[StepEvent], None]] = None):
        self.prompt = tuple(prompt)
        self.generate = generate
        self.cfg = cfg
        self.on_step = on_step
        self.stack = ContextStack.initial(self.prompt)
        self.trace = ResourceTrace(per_step_log=[] if cfg.record_steps else None)
        self.history: Dict[bytes, List[Tuple[Tokens, ...]]] = {}
        self.outcome = None

        self.trace.observe(self.stack.frames)
        if cfg.loop_detection:
            detect_loop(self.history, self.stack)

    @property
    def finished(self) -> bool:
        return self.outcome is not None

    def view(self) -> Tokens:
        if self.cfg.prompt_prefixing and self.trace.total_steps >= 1:
            return self.prompt + self.stack.active
        return self.stack.active

    def _finish(self, outcome):
        self.outcome = outcome
        return outcome

    def step(self):
        if self.finished:
            return self.outcome
        cfg = self.cfg
        if self.trace.total_steps >= cfg.max_steps:
            return self._finish(Bottom(BottomReason.LIMIT_EXCEEDED, Limit.STEPS))

        depth_before = self.stack.depth
        frame_before = self.stack.active
        try:
            emitted = tuple(self.generate(self.view()))
        except FrameParseError as exc:
            logger.warning("Generator rejected frame at depth %d: %s", depth_before, exc)
            return self._finish(Bottom(BottomReason.MALFORMED_OUTPUT, detail=str(exc)))

        self.trace.total_steps += 1
        self.trace.total_tokens_emitted += len(emitted)
        y = frame_before + emitted
        out = classify_output(y)

        if len(y) > cfg.max_local_space:
            if out.kind is Kind.PLAIN:
                return self._finish(Bottom(
                    BottomReason.MALFORMED_OUTPUT,
                    detail=f"frame reached {len(y)} tokens without a call or return block",
                ))
            return self._finish(Bottom(BottomReason.LIMIT_EXCEEDED, Limit.LOCAL_SPACE))
        gs, ls = self.trace.observe(self.stack.frames[:-1] + (y,))

        if out.kind is Kind.RETURN and depth_before == 1:
            if out.prefix:
                logger.debug("Root return discards %d prefix tokens", len(out.prefix))
            self._log_step(depth_before, ls, gs, frame_before, emitted, out.kind)
            return self._finish(Answer(out.payload))

        new_stack = apply_transition(self.stack, out, cfg)
        if new_stack.depth > cfg.max_depth:
            return self._finish(Bottom(BottomReason.LIMIT_EXCEEDED, Limit.DEPTH))
        new_gs, new_ls = measure(new_stack)
        if new_ls > cfg.max_local_space:
            return self._finish(Bottom(BottomReason.LIMIT_EXCEEDED, Limit.LOCAL_SPACE))
        if cfg.loop_detection and detect_loop(self.history, new_stack):
            return self._finish(Bottom(BottomReason.LOOP_DETECTED))

        self.trace.observe(new_stack.frames)
        self.stack = new_stack
        self._log_step(depth_before, max(ls, new_ls), max(gs, new_gs), frame_before, emitted, out.kind)
        return None

    def _log_step(self, depth, ls, gs, frame, emitted, kind):
        if self.trace.per_step_log is not None:
            self.trace.per_step_log.append((depth, ls, gs))
        logger.debug("step=%d depth=%d kind=%s ls=%d gs=%d",
                     self.trace.total_steps, depth, kind.value, ls, gs)
        if self.on_step is not None:
            self.on_step(StepEvent(
                step=self.trace.total_steps, depth=depth, frame=frame,
                emitted=emitted, kind=kind, ls=ls, gs=gs,
            ))

    def run(self) -> RunResult:
        while not self.finished:
            self.step()
        result = RunResult(self.outcome, self.trace)
        if result.is_answer:
            logger.info("Run answered after %d steps: %s", self.trace.total_steps, self.trace.record())
        else:
            logger.warning("Run ended in %s after %d steps: %s",
                           result.describe(), self.trace.total_steps, self.trace.record())
        return result


def run(prompt: Sequence[str], generate: Generator, cfg: Optional[RunConfig] = None,
        on_step: Optional[Callable[[StepEvent], None]] = None) -> RunResult:
    return StackMachine(prompt, generate, cfg or RunConfig(), on_step).run()
