"""
Recursive simulation of a Turing machine through the context stack.

Every frame is one call to STATE, POS, CELL, SYMBOL or RUN:

    <TAG> <sep> x1 .. xn <sep> bits(t) [<sep> sign bits(p)] [SEP] z1 [SEP] z2 ..

The number of [SEP] markers is the phase. At each phase the policy either calls
the next subfunction it needs or returns the function value, so a frame only
ever holds its arguments and O(1) subresults.
"""
import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import redis
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from .exceptions import FrameParseError
from .machines import TuringMachine, Verdict, run_tm
from .runtime import Kind, RunConfig, RunResult, run
from .tokens import SEP, Tokens, call_block, return_block

logger = logging.getLogger(__name__)

ARG = "<sep>"
STATE, POS, CELL, SYMBOL, RUN = "STATE", "POS", "CELL", "SYMBOL", "RUN"
MAX_PHASE = {STATE: 2, POS: 3, CELL: 3, SYMBOL: 2, RUN: 2}

MemoKey = Tuple[str, int, Optional[int]]


def encode_time(t: int) -> Tokens:
    return tuple(format(t, "b"))


def encode_position(p: int) -> Tokens:
    return ("-" if p < 0 else "+",) + tuple(format(abs(p), "b"))


def _decode_bits(tokens: Sequence[str]) -> int:
    if not tokens or any(bit not in ("0", "1") for bit in tokens):
        raise FrameParseError(f"expected binary digits, got {' '.join(tokens)!r}")
    return int("".join(tokens), 2)


def decode_position(tokens: Sequence[str]) -> int:
    if not tokens or tokens[0] not in ("+", "-"):
        raise FrameParseError(f"position must start with a sign, got {' '.join(tokens)!r}")
    value = _decode_bits(tokens[1:])
    return -value if tokens[0] == "-" else value


@dataclass(frozen=True)
class FrameEncoding:
    tag: str
    x: Tokens
    t: int
    p: Optional[int] = None
    results: Tuple[Tokens, ...] = ()

    @property
    def phase(self) -> int:
        return len(self.results)

    @property
    def key(self) -> MemoKey:
        return self.tag, self.t, self.p

    def tokens(self) -> Tokens:
        out = [self.tag, ARG, *self.x, ARG, *encode_time(self.t)]
        if self.p is not None:
            out += [ARG, *encode_position(self.p)]
        for result in self.results:
            out += [SEP, *result]
        return tuple(out)


def parse_frame(tokens: Sequence[str]) -> FrameEncoding:
    tokens = tuple(tokens)
    segments: List[List[str]] = [[]]
    for token in tokens:
        if token == SEP:
            segments.append([])
        else:
            segments[-1].append(token)
    head, results = segments[0], tuple(tuple(s) for s in segments[1:])

    args: List[List[str]] = [[]]
    for token in head:
        if token == ARG:
            args.append([])
        else:
            args[-1].append(token)
    if len(args[0]) != 1 or args[0][0] not in MAX_PHASE:
        raise FrameParseError(f"frame does not start with a function tag: {tokens[:3]!r}")
    tag = args[0][0]
    expected = 4 if tag == CELL else 3
    if len(args) != expected:
        raise FrameParseError(f"{tag} frame carries {len(args) - 1} arguments")
    if len(results) > MAX_PHASE[tag]:
        raise FrameParseError(f"{tag} frame is past its last phase")
    p = decode_position(args[3]) if tag == CELL else None
    return FrameEncoding(tag, tuple(args[1]), _decode_bits(args[2]), p, results)


def _single(tm: TuringMachine, value: Tokens, pool, what: str) -> str:
    if len(value) != 1 or value[0] not in pool:
        raise FrameParseError(f"expected a {what}, got {' '.join(value)!r}")
    return value[0]


def next_action(tm: TuringMachine, frame: FrameEncoding) -> Tuple[Kind, Tokens]:
    """The policy step for one frame: (CALL, child frame) or (RETURN, value)."""
    f, t, r = frame, frame.t, frame.results

    def call(tag, time, p=None):
        return Kind.CALL, FrameEncoding(tag, f.x, time, p).tokens()

    def state(i):
        return _single(tm, r[i], tm.states, "state")

    def symbol(i):
        return _single(tm, r[i], tm.alphabet, "symbol")

    if f.tag == STATE:
        if f.phase == 0:
            return (Kind.RETURN, (tm.initial,)) if t == 0 else call(STATE, t - 1)
        if f.phase == 1:
            return call(SYMBOL, t - 1)
        return Kind.RETURN, (tm.delta(state(0), symbol(1))[0],)

    if f.tag == POS:
        if f.phase == 0:
            return (Kind.RETURN, encode_position(0)) if t == 0 else call(STATE, t - 1)
        if f.phase == 1:
            return call(SYMBOL, t - 1)
        if f.phase == 2:
            return call(POS, t - 1)
        move = tm.delta(state(0), symbol(1))[2]
        return Kind.RETURN, encode_position(decode_position(r[2]) + move)

    if f.tag == CELL:
        if f.phase == 0:
            if t == 0:
                inside = 0 <= f.p < len(f.x)
                return Kind.RETURN, (f.x[f.p] if inside else tm.blank,)
            return call(POS, t - 1)
        moved_away = decode_position(r[0]) != f.p
        if f.phase == 1:
            return call(CELL, t - 1, f.p) if moved_away else call(STATE, t - 1)
        if f.phase == 2:
            return (Kind.RETURN, (symbol(1),)) if moved_away else call(SYMBOL, t - 1)
        return Kind.RETURN, (tm.delta(state(1), symbol(2))[1],)

    if f.tag == SYMBOL:
        if f.phase == 0:
            return call(POS, t)
        if f.phase == 1:
            return call(CELL, t, decode_position(r[0]))
        return Kind.RETURN, (symbol(1),)

    # RUN
    if f.phase == 0:
        return call(STATE, t)
    if f.phase == 1:
        q = state(0)
        if q in tm.accepting:
            return Kind.RETURN, ("1",)
        if q in tm.rejecting:
            return Kind.RETURN, ("0",)
        return call(RUN, t + 1)
    return Kind.RETURN, (_single(tm, r[1], ("0", "1"), "verdict bit"),)


def next_block(tm: TuringMachine, frame: Sequence[str]) -> Tokens:
    kind, body = next_action(tm, parse_frame(frame))
    if kind is Kind.CALL:
        return call_block(body)
    return return_block((SEP, *body))


class MemoStore:
    """Per-run write-once map from (tag, t, p) to a returned value"""

    def __init__(self):
        self._values: Dict[MemoKey, Tokens] = {}

    def get(self, key: MemoKey) -> Optional[Tokens]:
        return self._values.get(key)

    def put(self, key: MemoKey, value: Tokens):
        self._values.setdefault(key, tuple(value))

    def __len__(self):
        return len(self._values)


class RedisMemoStore(MemoStore):
    """Memo store shared across runs through a Redis hash.

    HSETNX keeps values write-once; concurrent runs may compute the same key
    twice, and the first write wins.
    """

    def __init__(self, namespace: str, url: Optional[str] = None, client=None):
        super().__init__()
        if client is None:
            url = url or settings.RCM_REDIS_URL
            if not url:
                raise ImproperlyConfigured("RCM_REDIS_URL is not set")
            client = redis.Redis.from_url(url)
        self.client = client
        self.namespace = namespace

    @staticmethod
    def _field(key: MemoKey) -> str:
        tag, t, p = key
        return f"{tag}:{t}:{'' if p is None else p}"

    def get(self, key):
        raw = self.client.hget(self.namespace, self._field(key))
        if raw is None:
            return None
        return tuple(json.loads(raw))

    def put(self, key, value):
        self.client.hsetnx(self.namespace, self._field(key), json.dumps(list(value)))

    def __len__(self):
        return int(self.client.hlen(self.namespace))


@dataclass
class CostLedger:
    invocations: Counter = field(default_factory=Counter)
    by_time: Counter = field(default_factory=Counter)
    memo_hits: int = 0

    def count(self, tag: str, t: int):
        self.invocations[tag] += 1
        self.by_time[(tag, t)] += 1

    @property
    def total(self) -> int:
        return sum(self.invocations.values())

    def as_dict(self) -> Dict[str, int]:
        data = {tag: self.invocations.get(tag, 0) for tag in MAX_PHASE}
        data["total"] = self.total
        data["memo_hits"] = self.memo_hits
        return data


class RecursiveTmGenerator:
    """Generator for the five-function simulation, with optional memoization."""

    def __init__(self, tm: TuringMachine, memo: Optional[MemoStore] = None,
                 ledger: Optional[CostLedger] = None):
        self.tm = tm
        self.memo = memo
        self.ledger = ledger if ledger is not None else CostLedger()

    def __call__(self, view: Tokens) -> Tokens:
        frame = parse_frame(view)
        memoized = self.memo is not None and frame.tag != RUN
        if frame.phase == 0:
            self.ledger.count(frame.tag, frame.t)
            if memoized:
                cached = self.memo.get(frame.key)
                if cached is not None:
                    self.ledger.memo_hits += 1
                    return return_block((SEP, *cached))
        kind, body = next_action(self.tm, frame)
        if kind is Kind.CALL:
            return call_block(body)
        if memoized:
            self.memo.put(frame.key, body)
        return return_block((SEP, *body))


@dataclass
class Decision:
    verdict: Optional[Verdict]
    result: RunResult
    ledger: CostLedger

    @property
    def trace(self):
        return self.result.trace


def evaluate_frame(tm: TuringMachine, frame: FrameEncoding, memo: bool = False,
                   cfg: Optional[RunConfig] = None,
                   memo_store: Optional[MemoStore] = None) -> Tuple[RunResult, CostLedger]:
    store = memo_store if memo_store is not None else (MemoStore() if memo else None)
    generator = RecursiveTmGenerator(tm, store)
    result = run(frame.tokens(), generator, cfg or RunConfig())
    return result, generator.ledger


def frame_value(result: RunResult) -> Optional[Tokens]:
    """The value a root frame returned, without its leading [SEP]."""
    if not result.is_answer:
        return None
    tokens = result.outcome.tokens
    return tokens[1:] if tokens and tokens[0] == SEP else tokens


def decide(tm: TuringMachine, x: Sequence[str], memo: bool = False,
           cfg: Optional[RunConfig] = None, memo_store: Optional[MemoStore] = None) -> Decision:
    result, ledger = evaluate_frame(tm, FrameEncoding(RUN, tuple(x), 0), memo, cfg, memo_store)
    value = frame_value(result)
    verdict = None
    if value == ("1",):
        verdict = Verdict.ACCEPT
    elif value == ("0",):
        verdict = Verdict.REJECT
    logger.info("Recursive decision for %s on %r: %s (%d invocations, memo=%s)",
                tm.name, "".join(x), verdict.value if verdict else result.describe(),
                ledger.total, memo)
    return Decision(verdict, result, ledger)


def measure_invocations(tm: TuringMachine, x: Sequence[str], tag: str, t: int,
                        p: Optional[int] = None, cfg: Optional[RunConfig] = None) -> int:
    """Function invocations triggered by evaluating one frame without memoization."""
    _, ledger = evaluate_frame(tm, FrameEncoding(tag, tuple(x), t, p), cfg=cfg)
    return ledger.total


def cost_table(t_max: int, base: int = 1) -> List[Dict[str, int]]:
    """Worst-case invocation counts from the coupled recurrences, one row per t.

    ``base`` is the cost of one frame that returns without calling anything.
    """
    rows = []
    s = pos = cell = base
    sym = pos + cell + base
    for t in range(t_max + 1):
        if t > 0:
            s, pos, cell = (
                s + sym + base,
                pos + s + sym + base,
                pos + max(cell, s + sym) + base,
            )
            sym = pos + cell + base
        rows.append({"t": t, "state": s, "pos": pos, "cell": cell, "symbol": sym,
                     "V": max(s, pos), "C": cell})
    return rows


def cost_bound(t: int, base: int = 1) -> int:
    if t < 0:
        raise ValueError("t must be non-negative")
    return cost_table(t, base)[-1]["V"]


def cost_report(tm: TuringMachine, x: Sequence[str], t_max: int) -> List[Dict[str, int]]:
    """Measured V(t), C(t) against the recurrence bound for t = 0 .. t_max."""
    rows = []
    for t in range(t_max + 1):
        v = max(measure_invocations(tm, x, STATE, t), measure_invocations(tm, x, POS, t))
        c = max(measure_invocations(tm, x, CELL, t, p) for p in range(-t, t + 1))
        rows.append({"t": t, "V_measured": v, "C_measured": c, "bound": cost_bound(t)})
    return rows


def write_cost_report(rows: Sequence[Dict[str, int]], path):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=["t", "V_measured", "C_measured", "bound"])
        writer.writeheader()
        writer.writerows(rows)


def halting_time(tm: TuringMachine, x: Sequence[str], max_steps: int = 100_000) -> int:
    return run_tm(tm, x, max_steps).time
