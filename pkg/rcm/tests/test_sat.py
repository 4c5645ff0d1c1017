import json
from statistics import mean

import pytest
from hypothesis import given, settings, strategies as st

from rcm.exceptions import DimacsError, FormulaTooLarge, FrameParseError
from rcm.sat import (
    BANDS, ROOT_QUESTION, CnfFormula, analyze, band_of, brute_force, default_config, dpll_next_block,
    export_jsonl, gen_traces, parse_conditions, parse_dimacs, parse_task, random_3cnf, render_conditions,
    render_dimacs, render_problem, replay, returned_answers, solve, training_eligible,
)
from rcm.management.commands.sat import bench_instance
from rcm.reporting import summarize
from rcm.runtime import Kind, RunConfig
from rcm.tests.conftest import golden
from rcm.tokens import render_tokens, tokenize


class TestDimacs:
    def test_fixture(self, five_scientists):
        assert five_scientists.n == 5
        assert five_scientists.m == 5
        assert five_scientists.names == ("Alice", "Bob", "Carol", "Dave", "Eve")
        assert five_scientists.clauses[-1] == (-3, -5)

    def test_render_then_parse(self, five_scientists):
        assert parse_dimacs(render_dimacs(five_scientists)) == five_scientists

    def test_clauses_may_span_lines(self):
        f = parse_dimacs("p cnf 3 2\n1 -2\n3 0 -1\n0\n")
        assert f.clauses == ((1, -2, 3), (-1,))

    def test_empty_clause(self):
        assert parse_dimacs("p cnf 1 1\n0\n").clauses == ((),)

    def test_percent_terminates(self):
        assert parse_dimacs("p cnf 1 1\n1 0\n%\n0\n").m == 1

    def test_default_names(self):
        assert parse_dimacs("p cnf 2 1\n1 2 0\n").names == ("Alice", "Bob")

    @pytest.mark.parametrize("text, message", [
        ("1 2 0\n", "header"),
        ("p cnf 2 1\n1 2\n", "not terminated"),
        ("p cnf 2 2\n1 2 0\n", "declares 2"),
        ("p cnf 2 1\n1 3 0\n", "out of range"),
        ("p cnf 2 1\n1 x 0\n", "not a literal"),
        ("p cnf 2 1\np cnf 2 1\n1 0\n", "malformed header"),
        ("p dnf 2 1\n1 0\n", "malformed header"),
        ("p cnf -1 0\n", "negative"),
        ("c names: Alice\np cnf 2 1\n1 0\n", "names given"),
        ("c names: Al Al\np cnf 2 1\n1 0\n", "distinct"),
    ])
    def test_errors(self, text, message):
        with pytest.raises(DimacsError, match=message):
            parse_dimacs(text)


class TestOracle:
    def test_five_scientists_unsat(self, five_scientists):
        assert brute_force(five_scientists).verdict == "No"

    def test_witness(self):
        f = parse_dimacs("p cnf 2 2\n-1 0\n1 2 0\n")
        result = brute_force(f)
        assert result.satisfiable
        assert result.witness == {1: False, 2: True}

    def test_too_large(self):
        with pytest.raises(FormulaTooLarge):
            brute_force(CnfFormula(30, ((1,),)))


class TestRendering:
    def test_problem_narrative(self, five_scientists, five_scientists_problem):
        assert render_problem(five_scientists, noun="scientist") == five_scientists_problem

    def test_people_by_default(self):
        text = render_problem(parse_dimacs("p cnf 2 1\n1 -2 0\n"))
        assert text.startswith("Two people--Alice and Bob--are considering")
        assert "1. Either Alice joins the project or Bob does not join." in text
        assert text.endswith(ROOT_QUESTION)

    def test_unit_and_empty_conditions(self):
        f = parse_dimacs("p cnf 2 2\n-2 0\n0\n")
        assert render_conditions(f) == "1. Bob does not join the project.\n2. Impossible."

    def test_conditions_parse_back(self, five_scientists):
        assert parse_conditions(render_conditions(five_scientists), five_scientists.names) == \
            list(five_scientists.clauses)

    def test_unreadable_condition(self):
        with pytest.raises(DimacsError):
            parse_conditions("1. Either Zed joins or Bob joins.", ("Alice", "Bob"))


class TestPolicy:
    def test_root_analysis(self, five_scientists):
        analysis = analyze(five_scientists, {})
        assert analysis.outcome == "branch"
        assert analysis.variable == 1
        assert not analysis.forced

    def test_unit_conflict(self, five_scientists):
        analysis = analyze(five_scientists, {1: True})
        assert analysis.outcome == "No"
        assert analysis.lines[-2] == "Unit clauses force Carol to be both True and False -> CONFLICT"

    def test_forced_branch(self):
        f = parse_dimacs("p cnf 3 2\n-1 2 0\n2 3 0\n")
        frame = tokenize("Alice=True")
        text = render_tokens(dpll_next_block(f, frame))
        assert "Unit clause found: Bob=True\nForce Bob = True\n" in text
        assert text.endswith("<call>Alice=True, Bob=True</call>")

    def test_satisfied_task(self):
        f = parse_dimacs("p cnf 2 1\n1 2 0\n")
        text = render_tokens(dpll_next_block(f, tokenize("Alice=True")))
        assert text.endswith("All conditions satisfied!\n<return>Yes</return>")

    def test_clashing_assignments_conflict_example(self, five_scientists):
        block = dpll_next_block(five_scientists, tokenize("Alice=True, Carol=True"))
        assert render_tokens(block) == "\n" + golden("example2_content.txt")

    def test_parse_task(self, five_scientists):
        assert parse_task(five_scientists, ROOT_QUESTION) == {}
        assert parse_task(five_scientists, "Alice=True, Eve=False") == {1: True, 5: False}
        with pytest.raises(FrameParseError):
            parse_task(five_scientists, "Alice is in")
        with pytest.raises(FrameParseError):
            parse_task(five_scientists, "Zed=True")

    def test_returned_answers(self):
        reasoning = "Try Alice = True\nAlice=True. The answer is: No.\nTry Alice = False\nYes"
        assert returned_answers(reasoning) == ["No", "Yes"]

    def test_reasoning_without_result(self, five_scientists):
        with pytest.raises(FrameParseError):
            dpll_next_block(five_scientists, tokenize(ROOT_QUESTION + "\nCondition 1:\n"))


class TestSolve:
    def test_five_scientists(self, five_scientists):
        outcome = solve(five_scientists, keep_events=True)
        assert outcome.verdict == "No"
        assert [e.kind for e in outcome.events] == [Kind.CALL, Kind.RETURN, Kind.CALL, Kind.RETURN, Kind.RETURN]
        assert outcome.trace.max_depth == 2

    @pytest.mark.parametrize("cfg", [
        RunConfig(),
        RunConfig(question_preservation=True),
        RunConfig(prompt_prefixing=True),
    ])
    def test_variants_agree(self, five_scientists, cfg):
        assert solve(five_scientists, cfg).verdict == "No"

    def test_step_limit(self, five_scientists):
        outcome = solve(five_scientists, default_config(max_steps=2))
        assert outcome.verdict is None
        assert outcome.result.describe() == "bottom:limit_exceeded:steps"

    def test_trajectory_outgrows_active_context(self):
        ratios = []
        for seed in range(5):
            trace = solve(random_3cnf(10, 45, seed)).trace
            assert trace.total_tokens_emitted >= trace.max_local_space // 2
            ratios.append(trace.total_tokens_emitted / trace.max_local_space)
        assert mean(ratios) > 2


@settings(max_examples=80, deadline=None)
@given(
    n=st.integers(1, 6), m=st.integers(0, 14), seed=st.integers(0, 10_000),
    qp=st.booleans(), prefixing=st.booleans(),
)
def test_dpll_matches_brute_force(n, m, seed, qp, prefixing):
    f = random_3cnf(n, m, seed)
    cfg = RunConfig(question_preservation=qp, prompt_prefixing=prefixing)
    assert solve(f, cfg).verdict == brute_force(f).verdict


class TestTraces:
    def test_first_sample_matches_golden(self, five_scientists, five_scientists_problem):
        samples, outcome = gen_traces(five_scientists, five_scientists_problem)
        assert outcome.verdict == "No"
        assert len(samples) == 5
        first = samples[0]
        assert first.user == golden("example1_prompt.txt")
        assert first.assistant_prefix == ""
        assert first.assistant_content == golden("example1_content.txt")

    def test_continuation_sample_matches_golden(self, five_scientists, five_scientists_problem):
        samples, _ = gen_traces(five_scientists, five_scientists_problem)
        continuation = samples[2]
        assert continuation.user == golden("example3_prompt.txt")
        assert continuation.assistant_prefix == golden("example3_prefix.txt")
        assert continuation.assistant_content == golden("example3_content.txt")

    def test_child_samples_name_their_task(self, five_scientists, five_scientists_problem):
        samples, _ = gen_traces(five_scientists, five_scientists_problem)
        assert samples[1].user.endswith("[Current Task]\nAlice=True")
        assert samples[1].assistant_content.endswith("<return>No</return>")
        assert samples[3].user.endswith("[Current Task]\nAlice=False")

    def test_replay_reproduces_the_run(self, five_scientists):
        samples, outcome = gen_traces(five_scientists)
        replayed = replay(samples)
        assert replayed.answer_text == outcome.verdict == "No"
        assert replayed.trace == outcome.trace

    def test_replay_of_satisfiable_formula(self):
        f = random_3cnf(5, 8, 3)
        samples, outcome = gen_traces(f)
        assert replay(samples).answer_text == outcome.verdict == brute_force(f).verdict

    def test_replay_misses_unknown_tasks(self, five_scientists):
        samples, _ = gen_traces(five_scientists)
        result = replay(samples[:1])
        assert result.outcome.reason.value == "malformed_output"

    def test_export(self, five_scientists, tmp_path):
        samples, _ = gen_traces(five_scientists)
        path = tmp_path / "traces.jsonl"
        assert export_jsonl(samples, path) == 5
        records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
        assert set(records[0]) == {"user", "assistant_prefix", "assistant_content"}
        assert records[4]["assistant_content"].endswith("<return>No</return>")


class TestInstances:
    def test_random_is_seeded(self):
        assert random_3cnf(8, 20, 7) == random_3cnf(8, 20, 7)
        assert random_3cnf(8, 20, 7) != random_3cnf(8, 20, 8)

    def test_three_distinct_variables(self):
        f = random_3cnf(6, 30, 1)
        assert all(len({abs(lit) for lit in clause}) == 3 for clause in f.clauses)

    @pytest.mark.parametrize("m, band", [(3, None), (4, "easy"), (19, "easy"), (20, "medium"),
                                         (30, "medium"), (31, "hard"), (50, "hard"), (51, None)])
    def test_bands(self, m, band):
        assert band_of(m) == band

    def test_training_filter(self):
        assert training_eligible(random_3cnf(10, 25, 0))
        assert not training_eligible(random_3cnf(10, 40, 0))
        assert not training_eligible(random_3cnf(16, 10, 0))


@pytest.mark.slow
def test_bands_agree_with_brute_force_and_ratio_grows():
    rows = []
    for band, low, high in BANDS:
        for seed in range(100):
            f = random_3cnf(12, low + seed % (high - low + 1), seed)
            rows.append(bench_instance(f"{band}-{seed:03d}", f, default_config()))
    summary = summarize(rows)
    assert [entry["band"] for entry in summary] == ["easy", "medium", "hard"]
    assert all(entry["accuracy"] == 1.0 for entry in summary), summary
    ratios = [entry["ratio"] for entry in summary]
    assert ratios[0] < ratios[1] < ratios[2], ratios
