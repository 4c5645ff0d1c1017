"""
Recursive agentic systems: scaffold programs over generator oracles and SELF
oracles, evaluated as a least fixpoint.

A scaffold program is a Python generator function ``program(x, params, me)``.
It yields ``Ask`` to query a generator and ``Recurse`` to query a scaffold on a
new input, receives the answer through ``send``, and returns its output. The
evaluator drives activations on an explicit stack, memoizes (scaffold, input)
pairs, and answers ⊥ for any query that revisits an in-progress pair.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import yaml
from django.conf import settings

from .exceptions import BudgetExhausted, DescriptorError, ScaffoldError
from .runtime import Kind, classify_output
from .tokens import SEP, Tokens, render_tokens, return_block, tokenize

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures" / "systems"
MASK = "?"

GeneratorFn = Callable[[Tokens], Sequence[str]]


@dataclass(frozen=True)
class Ask:
    generator: str
    tokens: Tokens
    held: int = 0


@dataclass(frozen=True)
class Recurse:
    scaffold: Union[int, str]
    tokens: Tokens
    held: int = 0


class Diverges(Exception):
    """Raised by a program that detects it can never produce an output"""


@dataclass(frozen=True)
class Scaffold:
    name: str
    program: str
    params: Dict = field(default_factory=dict, hash=False)


@dataclass
class ScaffoldSystem:
    generators: Dict[str, GeneratorFn]
    scaffolds: List[Scaffold]
    name: str = "system"

    def __post_init__(self):
        for scaffold in self.scaffolds:
            if scaffold.program not in PROGRAMS:
                raise DescriptorError(f"unknown scaffold program {scaffold.program!r}")

    def resolve(self, ref: Union[int, str]) -> int:
        if isinstance(ref, int):
            if not 0 <= ref < len(self.scaffolds):
                raise ScaffoldError(f"scaffold index {ref} out of range")
            return ref
        for index, scaffold in enumerate(self.scaffolds):
            if scaffold.name == ref:
                return index
        raise ScaffoldError(f"unknown scaffold {ref!r}")

    def generator(self, name: str) -> GeneratorFn:
        try:
            return self.generators[name]
        except KeyError:
            raise ScaffoldError(f"unknown generator {name!r}") from None


@dataclass(frozen=True)
class EvalBudget:
    space: int = 2 ** 16
    calls: int = 100_000
    depth: int = 1_000

    def __post_init__(self):
        if self.space <= 0 or self.calls <= 0 or self.depth <= 0:
            raise ValueError("evaluation budgets must be positive")

    @classmethod
    def from_settings(cls, **overrides) -> "EvalBudget":
        values = {
            "space": settings.RCM_SCAFFOLD_SPACE,
            "calls": settings.RCM_SCAFFOLD_CALLS,
            "depth": settings.RCM_SCAFFOLD_DEPTH,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class Undefined(str, Enum):
    CYCLE = "cycle"
    BUDGET_EXCEEDED = "budget_exceeded"
    SPACE_EXCEEDED = "space_exceeded"


@dataclass
class EvalResult:
    output: Optional[Tokens]
    bottom: Optional[Undefined] = None
    max_space: int = 0
    calls: int = 0
    max_depth: int = 0
    memo: Dict[Tuple[int, Tokens], Tokens] = field(default_factory=dict)
    oracle_queries: Counter = field(default_factory=Counter)

    @property
    def defined(self) -> bool:
        return self.output is not None

    def describe(self) -> str:
        return render_tokens(self.output) if self.defined else f"bottom:{self.bottom.value}"


@dataclass
class _Activation:
    index: int
    tokens: Tokens
    program: Iterator
    space: int
    pending: Optional[Recurse] = None


def evaluate(system: ScaffoldSystem, entry: Union[int, str], x: Sequence[str],
             budget: Optional[EvalBudget] = None,
             memo: Optional[Dict[Tuple[int, Tokens], Tokens]] = None) -> EvalResult:
    budget = budget or EvalBudget()
    result = EvalResult(None, memo=dict(memo or {}))
    stack: List[_Activation] = []
    in_progress = set()

    def start(index: int, tokens: Tokens) -> Optional[Undefined]:
        if result.calls >= budget.calls or len(stack) >= budget.depth:
            return Undefined.BUDGET_EXCEEDED
        scaffold = system.scaffolds[index]
        program = PROGRAMS[scaffold.program](tokens, scaffold.params, index)
        stack.append(_Activation(index, tokens, program, len(tokens)))
        in_progress.add((index, tokens))
        result.calls += 1
        result.max_depth = max(result.max_depth, len(stack))
        return None

    def meter(activation: _Activation, size: int) -> bool:
        activation.space = max(activation.space, size)
        result.max_space = max(result.max_space, activation.space)
        return activation.space <= budget.space

    def undefined(reason: Undefined) -> EvalResult:
        result.bottom = reason
        for activation in stack:
            activation.program.close()
        logger.warning("Scaffold evaluation undefined (%s) after %d calls", reason.value, result.calls)
        return result

    root = (system.resolve(entry), tuple(x))
    if root in result.memo:
        result.output = result.memo[root]
        return result
    reason = start(*root)
    if reason:
        return undefined(reason)

    answer = None
    while stack:
        top = stack[-1]
        try:
            request = top.program.send(answer)
        except StopIteration as done:
            output = tuple(done.value)
            if not meter(top, len(top.tokens) + len(output)):
                return undefined(Undefined.SPACE_EXCEEDED)
            stack.pop()
            in_progress.discard((top.index, top.tokens))
            result.memo[(top.index, top.tokens)] = output
            answer = output
            if stack:
                parent = stack[-1]
                asked, parent.pending = parent.pending, None
                if not meter(parent, len(parent.tokens) + asked.held + len(asked.tokens) + len(output)):
                    return undefined(Undefined.SPACE_EXCEEDED)
            continue
        except Diverges:
            return undefined(Undefined.CYCLE)
        except BudgetExhausted:
            return undefined(Undefined.BUDGET_EXCEEDED)

        if isinstance(request, Ask):
            answer = tuple(system.generator(request.generator)(request.tokens))
            result.oracle_queries[request.generator] += 1
        elif isinstance(request, Recurse):
            key = (system.resolve(request.scaffold), tuple(request.tokens))
            result.oracle_queries["SELF"] += 1
            if key in in_progress:
                return undefined(Undefined.CYCLE)
            if key not in result.memo:
                if not meter(top, len(top.tokens) + request.held + len(request.tokens)):
                    return undefined(Undefined.SPACE_EXCEEDED)
                top.pending = request
                reason = start(*key)
                if reason:
                    return undefined(reason)
                answer = None
                continue
            answer = result.memo[key]
        else:
            raise ScaffoldError(f"scaffold program yielded {request!r}")
        if not meter(top, len(top.tokens) + request.held + len(request.tokens) + len(answer)):
            return undefined(Undefined.SPACE_EXCEEDED)

    result.output = result.memo[root]
    return result


# -- standalone loops ---------------------------------------------------------

def run_summarization_loop(x: Sequence[str], generate: GeneratorFn, summarize: GeneratorFn,
                           limit: float, stop: Callable[[Tokens], bool],
                           max_rounds: int = 10_000, on_round=None) -> Tokens:
    """Generate, and summarize whenever the output reaches ``limit`` tokens."""
    x = tuple(x)
    rounds = 0
    while not stop(x):
        if rounds >= max_rounds:
            raise BudgetExhausted(f"summarization loop did not stop within {max_rounds} rounds")
        y = tuple(generate(x))
        x = tuple(summarize(y)) if len(y) >= limit else y
        rounds += 1
        if on_round is not None:
            on_round(rounds, y, x)
    return x


def no_masks(x: Tokens) -> bool:
    return MASK not in x


def overwrite_masked(x: Tokens, y: Tokens) -> Tokens:
    return tuple(b if a == MASK else a for a, b in zip(x, y))


def run_diffusion_loop(x: Sequence[str], denoise: GeneratorFn,
                       transition: Callable[[Tokens, Tokens], Tokens] = overwrite_masked,
                       stop: Callable[[Tokens], bool] = no_masks, max_rounds: int = 1_000) -> Tokens:
    x = tuple(x)
    rounds = 0
    while not stop(x):
        if rounds >= max_rounds:
            raise BudgetExhausted(f"diffusion loop did not converge within {max_rounds} rounds")
        y = tuple(denoise(x))
        if len(y) != len(x):
            raise ScaffoldError("denoiser changed the sequence length")
        x = tuple(transition(x, y))
        rounds += 1
    return x


def majority_denoiser(x: Tokens) -> Tokens:
    """Fill every mask with the most frequent unmasked token (ties: smallest)."""
    counts = Counter(token for token in x if token != MASK and not token.isspace())
    if not counts:
        return x
    best = min(counts, key=lambda token: (-counts[token], token))
    return tuple(best if token == MASK else token for token in x)


# -- programs -----------------------------------------------------------------

def _split(tokens: Tokens) -> List[Tokens]:
    parts: List[List[str]] = [[]]
    for token in tokens:
        if token == SEP:
            parts.append([])
        elif not token.isspace():
            parts[-1].append(token)
    return [tuple(part) for part in parts]


def identity_program(x, params, me):
    return x
    yield  # pragma: no cover


def self_loop_program(x, params, me):
    answer = yield Recurse(params.get("target", me), x)
    return answer


def recursive_model_program(x, params, me):
    """The m=1, k=1 recursive model: one generator, SELF for every call block."""
    generator = params.get("generator", "f")
    max_steps = params.get("max_steps", 100_000)
    s = tuple(x)
    seen = {s}
    for _ in range(max_steps):
        y = s + tuple((yield Ask(generator, s)))
        out = classify_output(y)
        if out.kind is Kind.RETURN:
            return out.payload
        if out.kind is Kind.CALL:
            answer = yield Recurse(me, out.payload, held=len(out.prefix))
            s = out.prefix + tuple(answer)
        else:
            s = y
        if s in seen:
            raise Diverges(render_tokens(s))
        seen.add(s)
    raise BudgetExhausted(f"recursive model exceeded {max_steps} steps")


def prover_program(x, params, me):
    for seed in params.get("seeds", []):
        proof = yield Ask(params.get("generator", "prover"), x + (SEP,) + tokenize(str(seed)))
        verdict = yield Recurse(params.get("verifier", "Verifier"), x + (SEP,) + tuple(proof))
        if _split(verdict)[0] == ("correct",):
            return ("correct",)
    return ("wrong",)


def verifier_program(x, params, me):
    report = _split(tuple((yield Ask(params.get("generator", "verifier"), x))))
    status = report[0]
    if status in (("correct",), ("wrong",)):
        return status
    if status == ("incomplete",):
        for subgoal in report[1:]:
            proved = yield Recurse(params.get("prover", "Prover"), subgoal)
            if _split(proved)[0] != ("correct",):
                return ("wrong",)
        return ("correct",)
    return ("wrong",)


def summarization_program(x, params, me):
    generate, summarize = params.get("generator", "f"), params.get("summarizer", "g")
    limit = params.get("limit", 2 ** 16)
    stop = tuple(tokenize(params["stop"])) if "stop" in params else None
    x = tuple(x)
    for _ in range(params.get("max_rounds", 10_000)):
        if stop is not None and x[-len(stop):] == stop:
            return x
        y = tuple((yield Ask(generate, x)))
        x = tuple((yield Ask(summarize, y, held=len(x)))) if len(y) >= limit else y
    raise BudgetExhausted("summarization scaffold ran out of rounds")


def diffusion_program(x, params, me):
    x = tuple(x)
    for _ in range(params.get("max_rounds", 1_000)):
        if no_masks(x):
            return x
        y = tuple((yield Ask(params.get("generator", "denoiser"), x)))
        x = overwrite_masked(x, y)
    raise BudgetExhausted("diffusion scaffold did not converge")


PROGRAMS = {
    "identity": identity_program,
    "self_loop": self_loop_program,
    "recursive_model": recursive_model_program,
    "prover": prover_program,
    "verifier": verifier_program,
    "summarization": summarization_program,
    "diffusion": diffusion_program,
}


def minimal_recursive_system(generate: GeneratorFn, name: str = "minimal") -> ScaffoldSystem:
    """One generator, one scaffold: the plain recursive model as a system."""
    return ScaffoldSystem({"f": generate}, [Scaffold("model", "recursive_model", {"generator": "f"})], name)


# -- system files -------------------------------------------------------------

def table_key(text: str) -> str:
    return " ".join(token for token in tokenize(text) if not token.isspace())


class TableGenerator:
    """Stub generator answering from a lookup table keyed by normalized text"""

    def __init__(self, table: Dict[str, str], default: str = ""):
        self.table = {table_key(key): value for key, value in table.items()}
        self.default = default

    def __call__(self, tokens: Tokens) -> Tokens:
        key = " ".join(token for token in tokens if not token.isspace())
        return tokenize(self.table.get(key, self.default))


def keep_last(n: int) -> GeneratorFn:
    def summarize(tokens: Tokens) -> Tokens:
        return tuple(tokens)[-n:]
    return summarize


def count_down(tokens: Tokens) -> Tokens:
    """Appends the predecessor of a trailing positive number, else 0"""
    last = tokens[-1] if tokens else ""
    return tuple(tokens) + (str(int(last) - 1) if last.isdigit() and int(last) > 0 else "0",)


BUILTIN_GENERATORS = {
    "identity": lambda args: (lambda tokens: tuple(tokens)),
    "echo": lambda args: (lambda tokens: return_block(tokens)),
    "count_down": lambda args: count_down,
    "keep_last": lambda args: keep_last(int(args.get("n", 1))),
    "majority": lambda args: majority_denoiser,
}


def _build_generator(name: str, definition) -> GeneratorFn:
    if not isinstance(definition, dict):
        raise DescriptorError(f"generator {name!r} must be a mapping")
    if "builtin" in definition:
        try:
            return BUILTIN_GENERATORS[definition["builtin"]](definition.get("args") or {})
        except KeyError:
            raise DescriptorError(f"unknown builtin generator {definition['builtin']!r}") from None
    if "table" in definition:
        return TableGenerator({str(k): str(v) for k, v in (definition["table"] or {}).items()},
                              str(definition.get("default", "")))
    raise DescriptorError(f"generator {name!r} needs a 'table' or a 'builtin'")


def parse_system(text: str) -> ScaffoldSystem:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise DescriptorError(f"system file is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict) or not doc.get("scaffolds"):
        raise DescriptorError("system file needs a non-empty 'scaffolds' list")
    generators = {
        name: _build_generator(name, definition) for name, definition in (doc.get("generators") or {}).items()
    }
    scaffolds = []
    for entry in doc["scaffolds"]:
        if not isinstance(entry, dict) or "program" not in entry:
            raise DescriptorError(f"scaffold entry {entry!r} needs a 'program'")
        scaffolds.append(Scaffold(str(entry.get("name", entry["program"])), entry["program"],
                                  dict(entry.get("params") or {})))
    system = ScaffoldSystem(generators, scaffolds, str(doc.get("name", "system")))
    for scaffold in scaffolds:
        for key in ("generator", "summarizer"):
            if key in scaffold.params and scaffold.params[key] not in generators:
                raise DescriptorError(f"{scaffold.name}: unknown generator {scaffold.params[key]!r}")
        for key in ("verifier", "prover", "target"):
            if key in scaffold.params:
                try:
                    system.resolve(scaffold.params[key])
                except ScaffoldError as exc:
                    raise DescriptorError(f"{scaffold.name}: {exc}") from exc
    return system


def load_system(name_or_path: str) -> ScaffoldSystem:
    path = Path(name_or_path)
    if not path.exists():
        path = FIXTURE_DIR / f"{name_or_path}.yaml"
    if not path.exists():
        raise DescriptorError(f"no system file at {name_or_path!r}")
    return parse_system(path.read_text(encoding="utf-8"))


def run_prover_verifier(goal: str, seeds: Sequence[str], prover: Dict[str, str],
                        verifier: Dict[str, str], k: Optional[int] = None,
                        budget: Optional[EvalBudget] = None) -> EvalResult:
    """Mutual recursion of the prover and verifier scaffolds over stub tables; at most ``k`` attempts."""
    seeds = list(seeds)[:k] if k is not None else list(seeds)
    system = ScaffoldSystem(
        {"prover": TableGenerator(prover, "none"), "verifier": TableGenerator(verifier, "wrong")},
        [
            Scaffold("Prover", "prover", {"generator": "prover", "verifier": "Verifier", "seeds": seeds}),
            Scaffold("Verifier", "verifier", {"generator": "verifier", "prover": "Prover"}),
        ],
        "prover-verifier",
    )
    return evaluate(system, "Prover", tokenize(goal), budget)
