"""
Single-tape Turing machines and alternating Turing machines: descriptors,
direct execution and game-tree evaluation. These are the ground-truth oracles
for every simulating generator.

Descriptor files are YAML documents:

    name: parity
    kind: deterministic          # or: alternating
    alphabet: ['0', '1', '_']
    blank: '_'
    states: [even, odd, accept, reject]
    initial: even
    accepting: [accept]
    rejecting: [reject]
    existential: []              # alternating machines only
    universal: []                # alternating machines only
    transitions:                 # state, read, next state, write, move
      - [even, '0', even, '0', 1]
"""
import itertools
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import yaml

from .exceptions import DescriptorError, NonDeciderError
from .tokens import RESERVED

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures" / "machines"

MOVES = (-1, 0, 1)

Action = Tuple[str, str, int]  # (next state, written symbol, move)


class Verdict(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class Configuration:
    state: str
    tape: Tuple[Tuple[int, str], ...] = ()
    head: int = 0

    def read(self, index: int, blank: str) -> str:
        for cell, symbol in self.tape:
            if cell == index:
                return symbol
        return blank

    def cells(self) -> Dict[int, str]:
        return dict(self.tape)

    def support(self) -> List[int]:
        return [cell for cell, _ in self.tape]


def make_tape(cells: Mapping[int, str], blank: str) -> Tuple[Tuple[int, str], ...]:
    return tuple(sorted((i, s) for i, s in cells.items() if s != blank))


def write_cell(config: Configuration, index: int, symbol: str, blank: str) -> Tuple[Tuple[int, str], ...]:
    cells = config.cells()
    if symbol == blank:
        cells.pop(index, None)
    else:
        cells[index] = symbol
    return tuple(sorted(cells.items()))


def _check_names(names: Iterable[str], what: str):
    for name in names:
        if not isinstance(name, str) or not name:
            raise DescriptorError(f"{what} names must be non-empty strings, got {name!r}")
        if name in RESERVED or any(ch in name for ch in ": \t\n"):
            raise DescriptorError(f"{what} {name!r} collides with the token vocabulary")


@dataclass(frozen=True)
class TuringMachine:
    alphabet: Tuple[str, ...]
    blank: str
    states: Tuple[str, ...]
    initial: str
    accepting: FrozenSet[str]
    rejecting: FrozenSet[str]
    transitions: Mapping[Tuple[str, str], Action] = field(default_factory=dict)
    name: str = "machine"

    def __post_init__(self):
        _validate_common(self)
        delta = dict(self.transitions)
        for state in self.states:
            for symbol in self.alphabet:
                if self.is_halting(state):
                    # halting states self-loop
                    delta[(state, symbol)] = (state, symbol, 0)
                elif (state, symbol) not in delta:
                    raise DescriptorError(f"{self.name}: no transition for ({state}, {symbol})")
        for (state, symbol), action in delta.items():
            _validate_action(self, state, symbol, action)
        object.__setattr__(self, "transitions", delta)

    def is_halting(self, state: str) -> bool:
        return state in self.accepting or state in self.rejecting

    def delta(self, state: str, symbol: str) -> Action:
        return self.transitions[(state, symbol)]


@dataclass(frozen=True)
class AlternatingTM:
    alphabet: Tuple[str, ...]
    blank: str
    states: Tuple[str, ...]
    initial: str
    accepting: FrozenSet[str]
    rejecting: FrozenSet[str]
    existential: FrozenSet[str]
    universal: FrozenSet[str]
    transitions: Mapping[Tuple[str, str], Tuple[Action, ...]] = field(default_factory=dict)
    name: str = "atm"

    def __post_init__(self):
        _validate_common(self)
        if self.existential & self.universal:
            raise DescriptorError(f"{self.name}: a state cannot be both existential and universal")
        for state in self.states:
            labelled = state in self.existential or state in self.universal
            if self.is_halting(state) and labelled:
                raise DescriptorError(f"{self.name}: halting state {state} carries an alternation label")
            if not self.is_halting(state) and not labelled:
                raise DescriptorError(f"{self.name}: state {state} needs an alternation label")
        relation = {}
        for (state, symbol), actions in self.transitions.items():
            if self.is_halting(state):
                raise DescriptorError(f"{self.name}: halting state {state} has outgoing transitions")
            for action in actions:
                _validate_action(self, state, symbol, action)
            relation[(state, symbol)] = tuple(sorted(actions, key=_action_key))
        object.__setattr__(self, "transitions", relation)

    def is_halting(self, state: str) -> bool:
        return state in self.accepting or state in self.rejecting

    def actions(self, state: str, symbol: str) -> Tuple[Action, ...]:
        return self.transitions.get((state, symbol), ())


def _action_key(action: Action):
    return action[0], action[1], action[2]


def _validate_common(machine):
    _check_names(machine.alphabet, "symbol")
    _check_names(machine.states, "state")
    if len(set(machine.states)) != len(machine.states):
        raise DescriptorError(f"{machine.name}: duplicate state names")
    if machine.blank not in machine.alphabet:
        raise DescriptorError(f"{machine.name}: blank {machine.blank!r} not in alphabet")
    if machine.initial not in machine.states:
        raise DescriptorError(f"{machine.name}: initial state {machine.initial!r} undeclared")
    if machine.accepting & machine.rejecting:
        raise DescriptorError(f"{machine.name}: accepting and rejecting states overlap")
    unknown = (machine.accepting | machine.rejecting) - set(machine.states)
    if unknown:
        raise DescriptorError(f"{machine.name}: undeclared halting states {sorted(unknown)}")


def _validate_action(machine, state, symbol, action):
    if state not in machine.states or symbol not in machine.alphabet:
        raise DescriptorError(f"{machine.name}: transition from unknown ({state}, {symbol})")
    target, written, move = action
    if target not in machine.states or written not in machine.alphabet or move not in MOVES:
        raise DescriptorError(f"{machine.name}: invalid action {action!r} for ({state}, {symbol})")


# -- direct execution ---------------------------------------------------------

def initial_configuration(tm, x: Sequence[str]) -> Configuration:
    for symbol in x:
        if symbol == tm.blank or symbol not in tm.alphabet:
            raise DescriptorError(f"input symbol {symbol!r} is not a non-blank symbol of {tm.name}")
    return Configuration(tm.initial, make_tape(dict(enumerate(x)), tm.blank), 0)


def blank_configuration(tm) -> Configuration:
    return Configuration(tm.initial, (), 0)


def step_tm(tm: TuringMachine, c: Configuration) -> Configuration:
    target, written, move = tm.delta(c.state, c.read(c.head, tm.blank))
    return Configuration(target, write_cell(c, c.head, written, tm.blank), c.head + move)


@dataclass(frozen=True)
class TmRun:
    verdict: Verdict
    time: int
    space: int
    final: Configuration


def run_tm(tm: TuringMachine, x: Sequence[str], max_steps: int = 100_000) -> TmRun:
    config = initial_configuration(tm, x)
    visited = {config.head}
    steps = 0
    while not tm.is_halting(config.state) and steps < max_steps:
        config = step_tm(tm, config)
        visited.add(config.head)
        steps += 1
    if config.state in tm.accepting:
        verdict = Verdict.ACCEPT
    elif config.state in tm.rejecting:
        verdict = Verdict.REJECT
    else:
        verdict = Verdict.TIMEOUT
    return TmRun(verdict, steps, len(visited), config)


def trace_tm(tm: TuringMachine, x: Sequence[str], max_steps: int = 100_000) -> List[Configuration]:
    """Configurations c_0 .. c_T of a direct run (stops at halting or max_steps)."""
    config = initial_configuration(tm, x)
    history = [config]
    while not tm.is_halting(config.state) and len(history) <= max_steps:
        config = step_tm(tm, config)
        history.append(config)
    return history


# -- alternating machines -----------------------------------------------------

def successors(atm: AlternatingTM, c: Configuration) -> List[Tuple[Action, Configuration]]:
    """Successors of ``c`` in (q', a', d) lexicographic order."""
    symbol = c.read(c.head, atm.blank)
    return [
        (action, Configuration(action[0], write_cell(c, c.head, action[1], atm.blank), c.head + action[2]))
        for action in atm.actions(c.state, symbol)
    ]


def win_value(atm: AlternatingTM, c: Configuration, budget: int = 100_000,
              reverse: bool = False, memo: Optional[Dict[Configuration, int]] = None) -> int:
    """Acceptance value of ``c``: OR over existential, AND over universal successors.

    Evaluation is memoized and iterative; ``budget`` caps the number of distinct
    non-halting configurations expanded. A cycle or an exhausted budget raises
    NonDeciderError.
    """
    values = {} if memo is None else memo
    on_path = set()
    expanded = 0
    pending = [(c, False)]
    while pending:
        config, done = pending.pop()
        if config in values:
            continue
        if atm.is_halting(config.state):
            values[config] = 1 if config.state in atm.accepting else 0
            continue
        children = [child for _, child in successors(atm, config)]
        if done:
            on_path.discard(config)
            bits = [values[child] for child in children]
            if config.state in atm.existential:
                values[config] = int(any(bits))
            else:
                values[config] = int(all(bits))
            continue
        expanded += 1
        if expanded > budget:
            raise NonDeciderError(f"{atm.name}: evaluation exceeded {budget} configurations")
        on_path.add(config)
        pending.append((config, True))
        order = children if reverse else list(reversed(children))
        for child in order:
            if child in on_path:
                raise NonDeciderError(f"{atm.name}: configuration cycle through state {child.state}")
            if child not in values:
                pending.append((child, False))
    return values[c]


def reachable_configurations(atm: AlternatingTM, c: Configuration, budget: int = 100_000) -> List[Configuration]:
    seen = {c}
    order = [c]
    frontier = [c]
    while frontier:
        config = frontier.pop()
        if atm.is_halting(config.state):
            continue
        for _, child in successors(atm, config):
            if child not in seen:
                if len(seen) >= budget:
                    raise NonDeciderError(f"{atm.name}: more than {budget} reachable configurations")
                seen.add(child)
                order.append(child)
                frontier.append(child)
    return order


def _fresh(name: str, taken: set) -> str:
    candidate = name
    counter = 1
    while candidate in taken:
        candidate = f"{name}{counter}"
        counter += 1
    taken.add(candidate)
    return candidate


def normalize_atm(atm: AlternatingTM) -> AlternatingTM:
    """Give every non-halting (state, symbol) exactly two successors.

    Missing successors are padded with a stay-in-place self-write into a
    rejecting sink (existential) or an accepting sink (universal). Fanout above
    two is split through a balanced cascade of fresh states of the same type.
    """
    taken = set(atm.states)
    states = list(atm.states)
    accepting, rejecting = set(atm.accepting), set(atm.rejecting)
    existential, universal = set(atm.existential), set(atm.universal)
    relation: Dict[Tuple[str, str], Tuple[Action, ...]] = {}
    sinks = {}

    def sink(kind: str) -> str:
        if kind not in sinks:
            sinks[kind] = _fresh(f"{kind}_sink", taken)
            states.append(sinks[kind])
            (accepting if kind == "accept" else rejecting).add(sinks[kind])
        return sinks[kind]

    def pad(state: str, symbol: str) -> Action:
        kind = "reject" if state in existential else "accept"
        return sink(kind), symbol, 0

    def binary(state: str, symbol: str, actions: Sequence[Action], path: str):
        actions = list(actions)
        if len(actions) <= 2:
            while len(actions) < 2:
                actions.append(pad(state, symbol))
            relation[(state, symbol)] = tuple(actions)
            return
        half = (len(actions) + 1) // 2
        branches = []
        for label, part in (("l", actions[:half]), ("r", actions[half:])):
            if len(part) == 1:
                branches.append(part[0])
                continue
            fresh = _fresh(f"{state}~{path}{label}", taken)
            states.append(fresh)
            (existential if state in existential else universal).add(fresh)
            for other in atm.alphabet:
                if other != symbol:
                    relation[(fresh, other)] = (pad(fresh, other), pad(fresh, other))
            binary(fresh, symbol, part, path + label)
            branches.append((fresh, symbol, 0))
        relation[(state, symbol)] = tuple(branches)

    for state in atm.states:
        if atm.is_halting(state):
            continue
        for symbol in atm.alphabet:
            binary(state, symbol, atm.actions(state, symbol), f"{symbol}.")

    return AlternatingTM(
        alphabet=atm.alphabet, blank=atm.blank, states=tuple(states), initial=atm.initial,
        accepting=frozenset(accepting), rejecting=frozenset(rejecting),
        existential=frozenset(existential), universal=frozenset(universal),
        transitions=relation, name=atm.name,
    )


def is_binary(atm: AlternatingTM) -> bool:
    return all(
        len(atm.actions(state, symbol)) == 2
        for state in atm.states if not atm.is_halting(state)
        for symbol in atm.alphabet
    )


def random_atm(rng: random.Random, states: int = 5, alphabet=("0", "1", "_"),
               max_fanout: int = 3, name: str = "random") -> AlternatingTM:
    """A random alternating machine whose transitions only climb the state order,
    so every branch halts after at most ``states`` steps."""
    names = [f"s{i}" for i in range(states)]
    halting = ["acc", "rej"]
    existential, universal = set(), set()
    relation = {}
    for index, state in enumerate(names):
        (existential if rng.random() < 0.5 else universal).add(state)
        targets = names[index + 1:] + halting
        for symbol in alphabet:
            fanout = rng.randint(0, max_fanout)
            relation[(state, symbol)] = tuple(
                (rng.choice(targets), rng.choice(alphabet), rng.choice(MOVES))
                for _ in range(fanout)
            )
    return AlternatingTM(
        alphabet=tuple(alphabet), blank=alphabet[-1], states=tuple(names + halting),
        initial=names[0], accepting=frozenset({"acc"}), rejecting=frozenset({"rej"}),
        existential=frozenset(existential), universal=frozenset(universal),
        transitions=relation, name=name,
    )


# -- descriptor files ---------------------------------------------------------

def parse_machine(text: str):
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise DescriptorError(f"machine descriptor is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise DescriptorError("machine descriptor must be a mapping")
    required = ("alphabet", "blank", "states", "initial", "accepting", "rejecting", "transitions")
    missing = [key for key in required if key not in doc]
    if missing:
        raise DescriptorError(f"machine descriptor misses {', '.join(missing)}")

    kind = doc.get("kind", "deterministic")
    common = dict(
        alphabet=tuple(str(s) for s in doc["alphabet"]),
        blank=str(doc["blank"]),
        states=tuple(str(s) for s in doc["states"]),
        initial=str(doc["initial"]),
        accepting=frozenset(str(s) for s in doc["accepting"] or ()),
        rejecting=frozenset(str(s) for s in doc["rejecting"] or ()),
        name=str(doc.get("name", "machine")),
    )
    records = doc["transitions"] or []
    for record in records:
        if not isinstance(record, (list, tuple)) or len(record) != 5:
            raise DescriptorError(f"transition record {record!r} must have five fields")

    if kind == "deterministic":
        delta = {}
        for state, symbol, target, written, move in records:
            key = (str(state), str(symbol))
            if key in delta:
                raise DescriptorError(f"duplicate transition for {key}")
            delta[key] = (str(target), str(written), int(move))
        return TuringMachine(transitions=delta, **common)
    if kind == "alternating":
        relation: Dict[Tuple[str, str], List[Action]] = {}
        for state, symbol, target, written, move in records:
            relation.setdefault((str(state), str(symbol)), []).append((str(target), str(written), int(move)))
        return AlternatingTM(
            existential=frozenset(str(s) for s in doc.get("existential") or ()),
            universal=frozenset(str(s) for s in doc.get("universal") or ()),
            transitions={key: tuple(value) for key, value in relation.items()},
            **common,
        )
    raise DescriptorError(f"unknown machine kind {kind!r}")


def render_machine(machine) -> str:
    alternating = isinstance(machine, AlternatingTM)
    doc = {
        "name": machine.name,
        "kind": "alternating" if alternating else "deterministic",
        "alphabet": list(machine.alphabet),
        "blank": machine.blank,
        "states": list(machine.states),
        "initial": machine.initial,
        "accepting": sorted(machine.accepting),
        "rejecting": sorted(machine.rejecting),
    }
    records = []
    if alternating:
        doc["existential"] = sorted(machine.existential)
        doc["universal"] = sorted(machine.universal)
        for (state, symbol), actions in sorted(machine.transitions.items()):
            records.extend([state, symbol, *action] for action in actions)
    else:
        for (state, symbol), action in sorted(machine.transitions.items()):
            if not machine.is_halting(state):
                records.append([state, symbol, *action])
    doc["transitions"] = [list(record) for record in records]
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def load_machine(name_or_path: str):
    """Load a descriptor by fixture name (``parity``) or by file path."""
    path = Path(name_or_path)
    if not path.exists():
        path = FIXTURE_DIR / f"{name_or_path}.yaml"
    if not path.exists():
        raise DescriptorError(f"no machine descriptor at {name_or_path!r}")
    logger.debug("Loading machine descriptor %s", path)
    return parse_machine(path.read_text(encoding="utf-8"))


def all_inputs(alphabet: Sequence[str], max_length: int) -> Iterable[Tuple[str, ...]]:
    for length in range(max_length + 1):
        yield from itertools.product(alphabet, repeat=length)
