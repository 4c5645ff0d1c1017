"""
Depth-2 simulation with periodic summarization.

The worker frame is ``z <sep> u``: a summarized history ``z`` (an embedding) and
the trace ``u`` of update tokens emitted since the last summary. Every step
appends one update token. Once ``u`` reaches ``factor * N`` tokens the worker
returns an open call carrying ``embed(Conf(z, u)) <sep>``; the dispatcher at
depth 1 closes it, which restarts the worker on the fresh summary. The stack
never grows past two frames.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .atm import (
    UpdateToken, blank_configuration, embed, fold, parse_updates, render_updates,
)
from .exceptions import FrameParseError
from .machines import (
    Configuration, TuringMachine, Verdict, initial_configuration, trace_tm,
)
from .runtime import ResourceTrace, RunConfig, RunResult, run
from .tokens import CALL_CLOSE, CALL_OPEN, RET_CLOSE, RET_OPEN, Tokens, return_block

logger = logging.getLogger(__name__)

FRAME_SEP = "<sep>"
BITS = ("0", "1")
DEFAULT_FACTOR = 2
# tokens spent per summarization beyond the N-token embedding, plus the
# constant startup and shutdown blocks
OVERHEAD = 7


def frame_tokens(z: Sequence[UpdateToken], u: Sequence[UpdateToken] = ()) -> Tokens:
    return render_updates(z) + (FRAME_SEP,) + render_updates(u)


def parse_worker_frame(frame: Sequence[str]) -> Tuple[Tuple[UpdateToken, ...], Tuple[UpdateToken, ...]]:
    frame = tuple(frame)
    if frame.count(FRAME_SEP) != 1:
        raise FrameParseError("worker frame must hold exactly one <sep>")
    cut = frame.index(FRAME_SEP)
    return parse_updates(frame[:cut]), parse_updates(frame[cut + 1:])


def conf(z: Sequence[UpdateToken], u: Sequence[UpdateToken], tm: TuringMachine) -> Configuration:
    return fold(blank_configuration(tm.initial), tuple(z) + tuple(u), tm.blank)


def depth2_next_block(tm: TuringMachine, frame: Sequence[str], n: int,
                      factor: int = DEFAULT_FACTOR) -> Tokens:
    z, u = parse_worker_frame(frame)
    current = conf(z, u, tm)
    if tm.is_halting(current.state):
        return return_block(("1" if current.state in tm.accepting else "0",))
    if len(u) < factor * n:
        state, written, move = tm.delta(current.state, current.read(current.head, tm.blank))
        return (UpdateToken(state, written, move).render(),)
    return return_block((CALL_OPEN, *frame_tokens(embed(current, tm.blank))))


def dispatcher_next_block(frame: Sequence[str]) -> Tokens:
    frame = tuple(frame)
    if frame and frame[-1] in BITS:
        return return_block((frame[-1],))
    if CALL_OPEN in frame:
        opened = len(frame) - 1 - frame[::-1].index(CALL_OPEN)
        if CALL_CLOSE not in frame[opened:]:
            return (CALL_CLOSE,)
    raise FrameParseError("dispatcher frame ends in neither an open call nor a result bit")


def is_dispatcher_frame(frame: Sequence[str]) -> bool:
    return bool(frame) and (frame[-1] in BITS or CALL_OPEN in frame)


class SummarizingGenerator:
    def __init__(self, tm: TuringMachine, n: int, factor: int = DEFAULT_FACTOR):
        if n < 1 or factor < 1:
            raise ValueError("N and the summarization factor must be positive")
        self.tm = tm
        self.n = n
        self.factor = factor
        self.summaries = 0

    def __call__(self, view: Tokens) -> Tokens:
        if is_dispatcher_frame(view):
            return dispatcher_next_block(view)
        block = depth2_next_block(self.tm, view, self.n, self.factor)
        if block[0] == RET_OPEN and block[1] == CALL_OPEN:
            self.summaries += 1
        return block


def embed_bound(tm: TuringMachine, x: Sequence[str], max_steps: int = 100_000) -> int:
    """N: the longest embedding along the direct run on ``x``."""
    return max(len(embed(c, tm.blank)) for c in trace_tm(tm, x, max_steps))


def startup_prompt(tm: TuringMachine, x: Sequence[str]) -> Tokens:
    c0 = initial_configuration(tm, x)
    return (CALL_OPEN,) + frame_tokens(embed(c0, tm.blank))


@dataclass
class Simulation:
    verdict: Optional[Verdict]
    result: RunResult
    n: int
    factor: int
    simulated_steps: int
    summaries: int

    @property
    def trace(self) -> ResourceTrace:
        return self.result.trace


def simulate(tm: TuringMachine, x: Sequence[str], n: Optional[int] = None,
             factor: int = DEFAULT_FACTOR, cfg: Optional[RunConfig] = None,
             on_step=None) -> Simulation:
    n = n if n is not None else embed_bound(tm, x)
    generator = SummarizingGenerator(tm, n, factor)
    simulated = 0

    def observe(event):
        nonlocal simulated
        if len(event.emitted) == 1 and event.emitted[0] not in (CALL_CLOSE, RET_CLOSE):
            simulated += 1
        if on_step is not None:
            on_step(event)

    result = run(startup_prompt(tm, x), generator, cfg or RunConfig(), observe)
    verdict = None
    if result.is_answer:
        verdict = {("1",): Verdict.ACCEPT, ("0",): Verdict.REJECT}.get(result.outcome.tokens)
    logger.info("Summarized simulation of %s on %r: %s (N=%d, steps=%d, summaries=%d)",
                tm.name, "".join(x), verdict.value if verdict else result.describe(),
                n, simulated, generator.summaries)
    return Simulation(verdict, result, n, factor, simulated, generator.summaries)


def token_efficiency(trace: ResourceTrace, steps: int, n: int, factor: int = DEFAULT_FACTOR,
                     overhead: int = OVERHEAD) -> dict:
    """Emitted tokens against ``T + ceil(T / (factor N)) * (N + K)``."""
    bound = steps + math.ceil(steps / (factor * n)) * (n + overhead)
    return {
        "total_tokens": trace.total_tokens_emitted,
        "steps": steps,
        "bound": bound,
        "ratio": trace.total_tokens_emitted / steps if steps else float("inf"),
        "within_bound": trace.total_tokens_emitted <= bound,
    }
