"""
Alternating computation through call/return.

A configuration is carried in a frame as an embedding: a walk of update tokens
that, folded from the blank configuration, rebuilds the configuration up to a
shift of tape coordinates. The evaluation frame cycles through three phases:

    phase 0   embed(c)          -> call canon(embed(c) + delta_0(c))
    phase 1   embed(c) b0       -> call canon(embed(c) + delta_1(c))
    phase 2   embed(c) b0 b1    -> return b0 AND/OR b1

Halting configurations return their bit immediately.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

from .exceptions import DescriptorError, FrameParseError, NonDeciderError
from .machines import (
    AlternatingTM, Configuration, initial_configuration, is_binary, normalize_atm,
    reachable_configurations, successors, win_value, write_cell,
)
from .runtime import RunConfig, RunResult, run
from .tokens import Tokens, call_block, return_block

logger = logging.getLogger(__name__)

BITS = ("0", "1")


@dataclass(frozen=True)
class UpdateToken:
    state: str
    symbol: str
    move: int

    def render(self) -> str:
        return f"{self.state}:{self.symbol}:{self.move:+d}"

    @classmethod
    def parse(cls, token: str) -> "UpdateToken":
        parts = token.split(":")
        if len(parts) != 3 or parts[2] not in ("-1", "+0", "+1"):
            raise FrameParseError(f"not an update token: {token!r}")
        return cls(parts[0], parts[1], int(parts[2]))


def render_updates(updates: Iterable[UpdateToken]) -> Tokens:
    return tuple(u.render() for u in updates)


def parse_updates(tokens: Iterable[str]) -> Tuple[UpdateToken, ...]:
    return tuple(UpdateToken.parse(token) for token in tokens)


def blank_configuration(state: str) -> Configuration:
    return Configuration(state, (), 0)


def update(c: Configuration, tok: UpdateToken, blank: str) -> Configuration:
    return Configuration(tok.state, write_cell(c, c.head, tok.symbol, blank), c.head + tok.move)


def fold(c: Configuration, updates: Iterable[UpdateToken], blank: str) -> Configuration:
    for tok in updates:
        c = update(c, tok, blank)
    return c


def embed(c: Configuration, blank: str) -> Tuple[UpdateToken, ...]:
    """Canonical walk: sweep right over [lo, hi], then back left onto the head.

    The interval spans the non-blank cells and the head, so the walk only
    depends on the configuration up to a shift.
    """
    cells = c.cells()
    lo = min([*cells, c.head])
    hi = max([*cells, c.head])
    walk = [UpdateToken(c.state, cells.get(i, blank), +1) for i in range(lo, hi)]
    if c.head == hi:
        walk.append(UpdateToken(c.state, cells.get(hi, blank), 0))
    else:
        walk.extend(UpdateToken(c.state, cells.get(i, blank), -1) for i in range(hi, c.head, -1))
    return tuple(walk)


def canon(z: Sequence[UpdateToken], initial: str, blank: str) -> Tuple[UpdateToken, ...]:
    return embed(fold(blank_configuration(initial), z, blank), blank)


def translationally_equivalent(c1: Configuration, c2: Configuration) -> bool:
    if c1.state != c2.state or len(c1.tape) != len(c2.tape):
        return False
    if not c1.tape:
        return True
    shift = c1.tape[0][0] - c2.tape[0][0]
    if c1.head != c2.head + shift:
        return False
    return all(i1 == i2 + shift and s1 == s2 for (i1, s1), (i2, s2) in zip(c1.tape, c2.tape))


def action_update(action) -> UpdateToken:
    state, written, move = action
    return UpdateToken(state, written, move)


def eval_action(atm: AlternatingTM, frame: Sequence[str]) -> Tuple[str, Tokens]:
    """One policy step of the evaluation frame: ("call", child) or ("return", bit)."""
    frame = tuple(frame)
    split = len(frame)
    while split > 0 and frame[split - 1] in BITS:
        split -= 1
    z, bits = parse_updates(frame[:split]), frame[split:]
    if not z:
        raise FrameParseError("evaluation frame carries no configuration")
    if len(bits) > 2:
        raise FrameParseError(f"evaluation frame holds {len(bits)} result bits")

    c = fold(blank_configuration(atm.initial), z, atm.blank)
    if atm.is_halting(c.state):
        return "return", ("1" if c.state in atm.accepting else "0",)
    options = successors(atm, c)
    if len(options) != 2:
        raise FrameParseError(f"state {c.state} has {len(options)} successors; normalize the machine")
    if len(bits) < 2:
        child = canon(z + (action_update(options[len(bits)][0]),), atm.initial, atm.blank)
        return "call", render_updates(child)
    values = [bit == "1" for bit in bits]
    combined = any(values) if c.state in atm.existential else all(values)
    return "return", ("1" if combined else "0",)


def eval_next_block(atm: AlternatingTM, frame: Sequence[str]) -> Tokens:
    kind, body = eval_action(atm, frame)
    return call_block(body) if kind == "call" else return_block(body)


class AtmEvalGenerator:
    def __init__(self, atm: AlternatingTM, budget: int = 100_000):
        if not is_binary(atm):
            raise DescriptorError(f"{atm.name} must be normalized to binary fanout before evaluation")
        self.atm = atm
        self.budget = budget
        self.expansions = 0

    def __call__(self, view: Tokens) -> Tokens:
        if view and view[-1] not in BITS:
            self.expansions += 1
            if self.expansions > self.budget:
                raise NonDeciderError(f"{self.atm.name}: evaluation visited more than {self.budget} configurations")
        return eval_next_block(self.atm, view)


@dataclass
class AtmEvaluation:
    value: Optional[int]
    result: RunResult
    expansions: int

    @property
    def trace(self):
        return self.result.trace


def evaluate_atm(atm: AlternatingTM, x: Sequence[str], budget: int = 100_000,
                 cfg: Optional[RunConfig] = None, on_step=None) -> AtmEvaluation:
    machine = atm if is_binary(atm) else normalize_atm(atm)
    start = initial_configuration(machine, x)
    generator = AtmEvalGenerator(machine, budget)
    result = run(render_updates(embed(start, machine.blank)), generator, cfg or RunConfig(), on_step)
    value = None
    if result.is_answer and result.outcome.tokens in (("0",), ("1",)):
        value = int(result.outcome.tokens[0])
    logger.info("ATM %s on %r evaluated to %s after %d expansions",
                atm.name, "".join(x), value if value is not None else result.describe(),
                generator.expansions)
    return AtmEvaluation(value, result, generator.expansions)


def embed_length_bound(atm: AlternatingTM, x: Sequence[str], budget: int = 100_000) -> int:
    """Largest embedding over configurations reachable from the start on ``x``."""
    machine = atm if is_binary(atm) else normalize_atm(atm)
    start = initial_configuration(machine, x)
    return max(len(embed(c, machine.blank)) for c in reachable_configurations(machine, start, budget))


def oracle_value(atm: AlternatingTM, x: Sequence[str], budget: int = 100_000) -> int:
    return win_value(atm, initial_configuration(atm, x), budget)
