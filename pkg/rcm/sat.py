"""
DPLL trace generation over CNF formulas.

The generator is a recursive policy: a frame holds the current task (the root
question, or a cumulative assignment like ``Alice=True, Carol=False``) on its
first line followed by the reasoning written so far. On a fresh frame it
analyses every clause under the task's assignment and then returns Yes/No or
calls a child task; on a frame carrying returned answers it backtracks.
"""
import itertools
import json
import logging
import random
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .backend import build_prompt
from .exceptions import DimacsError, FormulaTooLarge, FrameParseError
from .runtime import RunConfig, RunResult, StepEvent, run
from .tokens import Tokens, call_block, render_tokens, return_block, tokenize

logger = logging.getLogger(__name__)

ROOT_QUESTION = "Is there a way to assign decisions so all these conditions are satisfied?"
BRUTE_FORCE_LIMIT = 24
TRAINING_MAX_VARIABLES = 15
BANDS = (("easy", 4, 19), ("medium", 20, 30), ("hard", 31, 50))

DEFAULT_NAMES = (
    "Alice", "Bob", "Carol", "Dave", "Eve", "Frank", "Grace", "Heidi", "Ivan",
    "Judy", "Mallory", "Niaj", "Olivia", "Peggy", "Rupert", "Sybil", "Trent",
    "Uma", "Victor", "Walter", "Xavier", "Yvonne", "Zoe",
)
COUNT_WORDS = (
    "Zero", "One", "Two", "Three", "Four", "Five", "Six", "Seven", "Eight", "Nine",
    "Ten", "Eleven", "Twelve", "Thirteen", "Fourteen", "Fifteen", "Sixteen",
    "Seventeen", "Eighteen", "Nineteen", "Twenty",
)

_NAME_RE = re.compile(r"^\w+$")
_ASSIGNMENT_RE = re.compile(r"^(\w+)=(True|False)$")
_RESULT_RE = re.compile(r"^(?:.*\. The answer is: )?(Yes|No)\.?$")


@dataclass(frozen=True)
class CnfFormula:
    n: int
    clauses: Tuple[Tuple[int, ...], ...]
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        for clause in self.clauses:
            for literal in clause:
                if literal == 0 or abs(literal) > self.n:
                    raise DimacsError(f"literal {literal} out of range for {self.n} variables")
        names = self.names or default_names(self.n)
        if len(names) != self.n:
            raise DimacsError(f"{len(names)} names given for {self.n} variables")
        if len(set(names)) != len(names) or not all(_NAME_RE.match(name) for name in names):
            raise DimacsError("variable names must be distinct single words")
        object.__setattr__(self, "names", tuple(names))

    @property
    def m(self) -> int:
        return len(self.clauses)

    def name(self, var: int) -> str:
        return self.names[var - 1]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name) + 1
        except ValueError:
            raise FrameParseError(f"unknown variable {name!r}") from None


def default_names(n: int) -> Tuple[str, ...]:
    return tuple(DEFAULT_NAMES[i] if i < len(DEFAULT_NAMES) else f"X{i + 1}" for i in range(n))


# -- DIMACS -------------------------------------------------------------------

def parse_dimacs(text: str) -> CnfFormula:
    header = None
    names: Tuple[str, ...] = ()
    clauses: List[Tuple[int, ...]] = []
    current: List[int] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            if line.startswith("c names:"):
                names = tuple(line[len("c names:"):].split())
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            parts = line.split()
            if header is not None or len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {number}: malformed header {line!r}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise DimacsError(f"line {number}: malformed header {line!r}") from None
            if header[0] < 0 or header[1] < 0:
                raise DimacsError(f"line {number}: negative counts in header")
            continue
        if header is None:
            raise DimacsError(f"line {number}: clause before the 'p cnf' header")
        for item in line.split():
            try:
                literal = int(item)
            except ValueError:
                raise DimacsError(f"line {number}: {item!r} is not a literal") from None
            if literal == 0:
                clauses.append(tuple(current))
                current = []
            elif abs(literal) > header[0]:
                raise DimacsError(f"line {number}: literal {literal} out of range 1..{header[0]}")
            else:
                current.append(literal)
    if header is None:
        raise DimacsError("missing 'p cnf' header")
    if current:
        raise DimacsError("last clause is not terminated by 0")
    if len(clauses) != header[1]:
        raise DimacsError(f"header declares {header[1]} clauses, body has {len(clauses)}")
    return CnfFormula(header[0], tuple(clauses), names)


def render_dimacs(f: CnfFormula) -> str:
    lines = [f"c names: {' '.join(f.names)}", f"p cnf {f.n} {f.m}"]
    lines += [" ".join(str(lit) for lit in clause) + " 0" for clause in f.clauses]
    return "\n".join(lines) + "\n"


# -- oracle -------------------------------------------------------------------

@dataclass(frozen=True)
class BruteForceResult:
    satisfiable: bool
    witness: Optional[Dict[int, bool]] = None

    @property
    def verdict(self) -> str:
        return "Yes" if self.satisfiable else "No"


def satisfies(f: CnfFormula, assignment: Dict[int, bool]) -> bool:
    return all(any(assignment.get(abs(lit)) == (lit > 0) for lit in clause) for clause in f.clauses)


def brute_force(f: CnfFormula) -> BruteForceResult:
    if f.n > BRUTE_FORCE_LIMIT:
        raise FormulaTooLarge(f"{f.n} variables exceed the enumeration limit of {BRUTE_FORCE_LIMIT}")
    for values in itertools.product((False, True), repeat=f.n):
        assignment = dict(enumerate(values, start=1))
        if satisfies(f, assignment):
            return BruteForceResult(True, assignment)
    return BruteForceResult(False)


# -- rendering ----------------------------------------------------------------

def _literal_words(f: CnfFormula, literal: int, project: bool = False) -> str:
    verb = "joins" if literal > 0 else "does not join"
    return f"{f.name(abs(literal))} {verb}" + (" the project" if project else "")


def render_condition(f: CnfFormula, clause: Sequence[int], first: bool = False) -> str:
    """One condition sentence; the opening condition names the project once."""
    if not clause:
        return "Impossible."
    words = [_literal_words(f, lit, project=first and i == 0) for i, lit in enumerate(clause)]
    if len(words) == 1:
        return words[0] + "."
    return "Either " + " or ".join(words) + "."


def render_conditions(f: CnfFormula) -> str:
    return "\n".join(
        f"{i}. {render_condition(f, clause, first=i == 1)}" for i, clause in enumerate(f.clauses, start=1)
    )


def parse_conditions(text: str, names: Sequence[str]) -> List[Tuple[int, ...]]:
    index = {name: i for i, name in enumerate(names, start=1)}
    clauses = []
    for line in text.strip().splitlines():
        _, _, body = line.partition(". ")
        body = body.rstrip(".")
        if body == "Impossible":
            clauses.append(())
            continue
        if body.startswith("Either "):
            body = body[len("Either "):]
        clause = []
        for words in body.split(" or "):
            name, _, verb = words.partition(" ")
            verb = verb.replace(" the project", "")
            if name not in index or verb not in ("joins", "does not join"):
                raise DimacsError(f"unreadable condition {line!r}")
            clause.append(index[name] if verb == "joins" else -index[name])
        clauses.append(tuple(clause))
    return clauses


def render_problem(f: CnfFormula, noun: str = "person", plural: Optional[str] = None) -> str:
    """Root problem narrative: entities deciding whether to join a project."""
    plural = plural or ("people" if noun == "person" else f"{noun}s")
    count = COUNT_WORDS[f.n] if f.n < len(COUNT_WORDS) else str(f.n)
    if f.n > 1:
        people = ", ".join(f.names[:-1]) + (", and " if f.n > 2 else " and ") + f.names[-1]
    else:
        people = "".join(f.names)
    intro = (
        f"{count} {plural}--{people}--are considering whether to join a new research project. "
        f"Each {noun} makes an independent decision about their participation. "
        "They may choose to join or not join the project regardless of others' choices."
    )
    return f"{intro}\n\nConditions:\n{render_conditions(f)}\n\n{ROOT_QUESTION}"


# -- random instances ---------------------------------------------------------

def random_3cnf(n: int, m: int, seed: int) -> CnfFormula:
    rng = random.Random(seed)
    width = min(3, n)
    clauses = []
    for _ in range(m):
        variables = rng.sample(range(1, n + 1), width)
        clauses.append(tuple(v if rng.random() < 0.5 else -v for v in variables))
    return CnfFormula(n, tuple(clauses))


def band_of(m: int) -> Optional[str]:
    for band, low, high in BANDS:
        if low <= m <= high:
            return band
    return None


def training_eligible(f: CnfFormula) -> bool:
    return f.n <= TRAINING_MAX_VARIABLES and band_of(f.m) in ("easy", "medium")


# -- the DPLL policy ----------------------------------------------------------

@dataclass
class Analysis:
    lines: List[str]
    outcome: str  # "Yes", "No" or "branch"
    variable: Optional[int] = None
    forced_value: Optional[bool] = None

    @property
    def forced(self) -> bool:
        return self.forced_value is not None


def _clause_text(f: CnfFormula, literals: Iterable[int]) -> str:
    return "(" + " v ".join(("" if lit > 0 else "~") + f.name(abs(lit)) for lit in literals) + ")"


def analyze(f: CnfFormula, assignment: Dict[int, bool]) -> Analysis:
    """Clause-by-clause analysis of ``f`` under a partial assignment."""
    lines: List[str] = []
    units: List[Tuple[int, bool]] = []
    open_clauses: List[Tuple[int, ...]] = []
    for number, clause in enumerate(f.clauses, start=1):
        lines.append(f"Condition {number}:")
        lines.append(f"  Clause: {_clause_text(f, clause)}")
        if any(assignment.get(abs(lit)) == (lit > 0) for lit in clause):
            lines.append("  -> satisfied")
            continue
        remaining = [lit for lit in clause if abs(lit) not in assignment]
        if not remaining:
            lines.append("  Simplify as: () -> CONFLICT")
            lines.append("Contradiction!")
            return Analysis(lines, "No")
        if len(remaining) == len(clause):
            lines.append("  (no simplification needed)")
        else:
            lines.append(f"  Simplify as: {_clause_text(f, remaining)}")
        if len(remaining) == 1:
            lit = remaining[0]
            units.append((abs(lit), lit > 0))
            lines.append(f"  -> unit: {f.name(abs(lit))}={lit > 0}")
        else:
            lines.append("  -> (not unit)")
        open_clauses.append(tuple(remaining))

    if not open_clauses:
        lines.append("All conditions satisfied!")
        return Analysis(lines, "Yes")

    forced: Dict[int, bool] = {}
    for var, value in units:
        if forced.get(var, value) != value:
            lines.append(f"Unit clauses force {f.name(var)} to be both True and False -> CONFLICT")
            lines.append("Contradiction!")
            return Analysis(lines, "No")
        forced[var] = value
    if units:
        var, value = units[0]
        lines.append(f"Unit clause found: {f.name(var)}={value}")
        return Analysis(lines, "branch", var, value)

    candidates = sorted({abs(lit) for clause in open_clauses for lit in clause})
    listed = ", ".join(f.name(v) for v in candidates)
    lines.append(f"No unit clause found. Unassigned: [{listed}]")
    return Analysis(lines, "branch", candidates[0])


def parse_task(f: CnfFormula, task: str, root_task: str = ROOT_QUESTION) -> Dict[int, bool]:
    if task == root_task:
        return {}
    assignment: Dict[int, bool] = {}
    for part in task.split(", "):
        match = _ASSIGNMENT_RE.match(part)
        if not match:
            raise FrameParseError(f"unparseable task {task!r}")
        assignment[f.index(match.group(1))] = match.group(2) == "True"
    return assignment


def child_task(f: CnfFormula, task: str, var: int, value: bool, root_task: str = ROOT_QUESTION) -> str:
    step = f"{f.name(var)}={value}"
    return step if task == root_task else f"{task}, {step}"


def returned_answers(reasoning: str) -> List[str]:
    answers = []
    for line in reasoning.split("\n"):
        match = _RESULT_RE.match(line)
        if match:
            answers.append(match.group(1))
    return answers


def dpll_next_block(f: CnfFormula, frame: Sequence[str], root_task: str = ROOT_QUESTION) -> Tokens:
    text = render_tokens(frame)
    task, _, reasoning = text.partition("\n")
    analysis = analyze(f, parse_task(f, task, root_task))
    lead = "" if text.endswith("\n") else "\n"

    if not reasoning:
        lines = ([] if task == root_task else [f"Given: {task}"]) + analysis.lines
        if analysis.outcome != "branch":
            return tokenize(lead + "".join(line + "\n" for line in lines)) + return_block((analysis.outcome,))
        verb = "Force" if analysis.forced else "Try"
        value = analysis.forced_value if analysis.forced else True
        lines.append(f"{verb} {f.name(analysis.variable)} = {value}")
        body = lead + "".join(line + "\n" for line in lines)
        return tokenize(body) + call_block(tokenize(child_task(f, task, analysis.variable, value, root_task)))

    answers = returned_answers(reasoning)
    if analysis.outcome != "branch" or not answers:
        raise FrameParseError("frame carries reasoning but no pending branch result")
    if answers[-1] == "Yes":
        return tokenize(lead) + return_block(("Yes",))
    if analysis.forced or len(answers) >= 2:
        return tokenize(lead) + return_block(("No",))
    body = f"{lead}Try {f.name(analysis.variable)} = False\n"
    return tokenize(body) + call_block(tokenize(child_task(f, task, analysis.variable, False, root_task)))


class DpllGenerator:
    """DPLL policy bound to one formula.

    With prompt prefixing the view starts with a copy of the root prompt,
    which is stripped before the frame is analysed.
    """

    def __init__(self, f: CnfFormula, prompt: Tokens, prefixed: bool = True,
                 root_task: str = ROOT_QUESTION):
        self.formula = f
        self.prompt = tuple(prompt)
        self.prefixed = prefixed
        self.root_task = root_task

    def frame_of(self, view: Tokens) -> Tokens:
        if self.prefixed and view[:len(self.prompt)] == self.prompt:
            rest = view[len(self.prompt):]
            return rest if rest else view
        return view

    def __call__(self, view: Tokens) -> Tokens:
        return dpll_next_block(self.formula, self.frame_of(view), self.root_task)


def default_config(**overrides) -> RunConfig:
    values = {"prompt_prefixing": True, "question_preservation": True}
    values.update(overrides)
    return RunConfig(**values)


@dataclass
class SatSolve:
    verdict: Optional[str]
    result: RunResult
    events: List[StepEvent] = field(default_factory=list)

    @property
    def trace(self):
        return self.result.trace


def solve(f: CnfFormula, cfg: Optional[RunConfig] = None, on_step=None,
          keep_events: bool = False) -> SatSolve:
    cfg = cfg or default_config()
    prompt = tokenize(ROOT_QUESTION)
    events: List[StepEvent] = []

    def observe(event):
        if keep_events:
            events.append(event)
        if on_step is not None:
            on_step(event)

    result = run(prompt, DpllGenerator(f, prompt, cfg.prompt_prefixing), cfg, observe)
    verdict = result.answer_text if result.answer_text in ("Yes", "No") else None
    logger.info("DPLL over %d variables / %d clauses: %s", f.n, f.m, verdict or result.describe())
    return SatSolve(verdict, result, events)


# -- training samples ---------------------------------------------------------

@dataclass(frozen=True)
class TraceSample:
    user: str
    assistant_prefix: str
    assistant_content: str

    def as_dict(self) -> Dict[str, str]:
        return {
            "user": self.user,
            "assistant_prefix": self.assistant_prefix,
            "assistant_content": self.assistant_content,
        }


def _split_frame(frame_text: str) -> Tuple[str, str]:
    task, _, reasoning = frame_text.partition("\n")
    return task, reasoning


def gen_traces(f: CnfFormula, root_problem: Optional[str] = None,
               cfg: Optional[RunConfig] = None) -> Tuple[List[TraceSample], SatSolve]:
    """One sample per generator invocation of a full recursive run."""
    root_problem = root_problem if root_problem is not None else render_problem(f)
    outcome = solve(f, cfg, keep_events=True)
    samples = []
    for event in outcome.events:
        frame_text = render_tokens(event.frame)
        task, prefix = _split_frame(frame_text)
        full = frame_text + render_tokens(event.emitted)
        content = full[len(task) + 1 + len(prefix):]
        samples.append(TraceSample(build_prompt(root_problem, task), prefix, content))
    logger.info("Generated %d trace samples", len(samples))
    return samples, outcome


class ReplayGenerator:
    """Plays recorded samples back as a generator keyed by (task, prefix)."""

    def __init__(self, samples: Sequence[TraceSample], prompt: Tokens, prefixed: bool = True):
        self.table: Dict[Tuple[str, str], str] = {}
        for sample in samples:
            task = sample.user.rsplit("[Current Task]\n", 1)[-1]
            self.table[(task, sample.assistant_prefix)] = sample.assistant_content
        self.prompt = tuple(prompt)
        self.prefixed = prefixed

    def __call__(self, view: Tokens) -> Tokens:
        frame = view
        if self.prefixed and view[:len(self.prompt)] == self.prompt:
            frame = view[len(self.prompt):] or view
        task, prefix = _split_frame(render_tokens(frame))
        try:
            content = self.table[(task, prefix)]
        except KeyError:
            raise FrameParseError(f"no recorded sample for task {task!r}") from None
        lead = "\n" if not prefix and not render_tokens(frame).endswith("\n") else ""
        return tokenize(lead + content)


def replay(samples: Sequence[TraceSample], cfg: Optional[RunConfig] = None) -> RunResult:
    cfg = cfg or default_config()
    prompt = tokenize(ROOT_QUESTION)
    return run(prompt, ReplayGenerator(samples, prompt, cfg.prompt_prefixing), cfg)


def export_jsonl(samples: Iterable[TraceSample], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for sample in samples:
            handle.write(json.dumps(sample.as_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count
