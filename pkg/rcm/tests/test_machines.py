import random

import pytest
from hypothesis import given, settings, strategies as st

from rcm.exceptions import DescriptorError, NonDeciderError
from rcm.machines import (
    AlternatingTM, Configuration, Verdict, all_inputs, initial_configuration, is_binary, load_machine,
    normalize_atm, parse_machine, random_atm, reachable_configurations, render_machine, run_tm,
    step_tm, successors, trace_tm, win_value,
)

PARITY_YAML = """
name: tiny
alphabet: ['1', '_']
blank: '_'
states: [go, hit, miss]
initial: go
accepting: [hit]
rejecting: [miss]
transitions:
  - [go, '1', go, '1', 1]
  - [go, '_', hit, '_', 0]
"""


class TestDeterministic:
    @pytest.mark.parametrize("x, verdict, time", [
        ("", Verdict.ACCEPT, 1),
        ("1", Verdict.REJECT, 2),
        ("11", Verdict.ACCEPT, 3),
        ("0100", Verdict.REJECT, 5),
    ])
    def test_parity(self, parity, x, verdict, time):
        result = run_tm(parity, tuple(x))
        assert (result.verdict, result.time) == (verdict, time)
        assert result.space == len(x) + 1

    def test_palindrome_matches_reversal(self, palindrome):
        for x in all_inputs(("a", "b"), 6):
            expected = Verdict.ACCEPT if x == x[::-1] else Verdict.REJECT
            assert run_tm(palindrome, x).verdict is expected, x

    def test_increment_rewrites_tape(self):
        result = run_tm(load_machine("increment"), tuple("011"))
        assert result.verdict is Verdict.ACCEPT
        assert result.final.tape == ((0, "1"), (1, "0"), (2, "0"))

    def test_increment_grows_left_on_overflow(self):
        result = run_tm(load_machine("increment"), tuple("11"))
        assert result.final.cells() == {-1: "1", 0: "0", 1: "0"}

    def test_countdown_time_grows_with_value(self, countdown):
        times = [run_tm(countdown, tuple(format(n, "04b"))).time for n in range(16)]
        assert all(run_tm(countdown, tuple(format(n, "04b"))).verdict is Verdict.ACCEPT for n in range(16))
        assert times == sorted(times)
        assert times[-1] > 4 * times[0]

    def test_timeout(self, parity):
        assert run_tm(parity, tuple("0000"), max_steps=2).verdict is Verdict.TIMEOUT

    def test_trace_matches_run(self, palindrome):
        x = tuple("abba")
        history = trace_tm(palindrome, x)
        assert len(history) == run_tm(palindrome, x).time + 1
        assert history[0] == initial_configuration(palindrome, x)
        assert all(step_tm(palindrome, a) == b for a, b in zip(history, history[1:]))

    def test_halting_states_self_loop(self, parity):
        halted = Configuration("accept", ((0, "1"),), 0)
        assert step_tm(parity, halted) == halted

    def test_blank_in_input_is_rejected(self, parity):
        with pytest.raises(DescriptorError):
            initial_configuration(parity, ("1", "_"))

    def test_unknown_symbol_in_input_is_rejected(self, parity):
        with pytest.raises(DescriptorError):
            initial_configuration(parity, ("2",))


class TestDescriptors:
    def test_parse(self):
        tm = parse_machine(PARITY_YAML)
        assert tm.name == "tiny"
        assert tm.delta("go", "1") == ("go", "1", 1)

    def test_render_then_parse(self, palindrome):
        again = parse_machine(render_machine(palindrome))
        assert again == palindrome

    def test_render_then_parse_alternating(self, boolean_eval):
        assert parse_machine(render_machine(boolean_eval)) == boolean_eval

    def test_missing_transition(self):
        with pytest.raises(DescriptorError, match="no transition"):
            parse_machine(PARITY_YAML.replace("  - [go, '_', hit, '_', 0]\n", ""))

    def test_duplicate_transition(self):
        with pytest.raises(DescriptorError, match="duplicate"):
            parse_machine(PARITY_YAML + "  - [go, '1', miss, '1', 0]\n")

    def test_bad_move(self):
        with pytest.raises(DescriptorError, match="invalid action"):
            parse_machine(PARITY_YAML.replace("[go, '1', go, '1', 1]", "[go, '1', go, '1', 2]"))

    def test_reserved_state_name(self):
        with pytest.raises(DescriptorError, match="token vocabulary"):
            parse_machine(PARITY_YAML.replace("[go, hit, miss]", "['[SEP]', hit, miss]"))

    def test_missing_keys(self):
        with pytest.raises(DescriptorError, match="misses"):
            parse_machine("name: x\nblank: '_'\n")

    def test_not_yaml(self):
        with pytest.raises(DescriptorError):
            parse_machine("transitions: [unclosed")

    def test_unknown_kind(self):
        with pytest.raises(DescriptorError, match="unknown machine kind"):
            parse_machine("kind: quantum\n" + PARITY_YAML)

    def test_unknown_fixture(self):
        with pytest.raises(DescriptorError):
            load_machine("no-such-machine")


def cyclic_atm():
    return AlternatingTM(
        alphabet=("_",), blank="_", states=("loop", "acc", "rej"), initial="loop",
        accepting=frozenset({"acc"}), rejecting=frozenset({"rej"}),
        existential=frozenset({"loop"}), universal=frozenset(),
        transitions={("loop", "_"): (("loop", "_", 0),)}, name="cyclic",
    )


class TestAlternating:
    @pytest.mark.parametrize("x, value", [
        ("1", 1), ("0", 0), ("01", 1), ("1#1", 1), ("1#0", 0), ("01#10#1", 1), ("", 0),
    ])
    def test_boolean_eval(self, boolean_eval, x, value):
        assert win_value(boolean_eval, initial_configuration(boolean_eval, tuple(x))) == value

    def test_successor_order(self, boolean_eval):
        config = initial_configuration(boolean_eval, ("1",))
        assert [action for action, _ in successors(boolean_eval, config)] == [("scan", "1", 0), ("skip", "1", 0)]

    def test_order_does_not_change_value(self, boolean_eval):
        for x in all_inputs(("0", "1", "#"), 4):
            c = initial_configuration(boolean_eval, x)
            assert win_value(boolean_eval, c) == win_value(boolean_eval, c, reverse=True)

    def test_cycle_raises(self):
        atm = cyclic_atm()
        with pytest.raises(NonDeciderError, match="cycle"):
            win_value(atm, initial_configuration(atm, ()))

    def test_budget(self, boolean_eval):
        c = initial_configuration(boolean_eval, tuple("0101#1"))
        with pytest.raises(NonDeciderError):
            win_value(boolean_eval, c, budget=2)

    def test_both_labels_rejected(self):
        with pytest.raises(DescriptorError):
            AlternatingTM(
                alphabet=("_",), blank="_", states=("s", "acc", "rej"), initial="s",
                accepting=frozenset({"acc"}), rejecting=frozenset({"rej"}),
                existential=frozenset({"s"}), universal=frozenset({"s"}),
            )

    def test_unlabelled_state_rejected(self):
        with pytest.raises(DescriptorError, match="alternation label"):
            AlternatingTM(
                alphabet=("_",), blank="_", states=("s", "acc", "rej"), initial="s",
                accepting=frozenset({"acc"}), rejecting=frozenset({"rej"}),
                existential=frozenset(), universal=frozenset(),
            )

    def test_normalized_fixture_is_binary(self, boolean_eval):
        binary = normalize_atm(boolean_eval)
        assert is_binary(binary)
        assert not is_binary(boolean_eval)
        for x in all_inputs(("0", "1", "#"), 4):
            assert win_value(binary, initial_configuration(binary, x)) == \
                win_value(boolean_eval, initial_configuration(boolean_eval, x))

    def test_reachable_configurations(self, boolean_eval):
        c = initial_configuration(boolean_eval, ("1",))
        reached = reachable_configurations(boolean_eval, c)
        assert reached[0] == c
        assert {config.state for config in reached} >= {"pick", "scan", "skip", "acc"}


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), x=st.lists(st.sampled_from(["0", "1"]), max_size=3))
def test_normalization_preserves_random_values(seed, x):
    atm = random_atm(random.Random(seed), states=4)
    binary = normalize_atm(atm)
    assert is_binary(binary)
    assert win_value(binary, initial_configuration(binary, x)) == win_value(atm, initial_configuration(atm, x))


@pytest.mark.parametrize("seed", range(40))
def test_normalized_random_machines_are_binary(seed):
    binary = normalize_atm(random_atm(random.Random(seed)))
    assert is_binary(binary)
    assert all(len(actions) == 2 for actions in binary.transitions.values())


def test_padded_actions_are_kept():
    atm = AlternatingTM(
        alphabet=("_",), blank="_", states=("s", "acc", "rej"), initial="s",
        accepting=frozenset({"acc"}), rejecting=frozenset({"rej"}),
        existential=frozenset({"s"}), universal=frozenset(),
        transitions={("s", "_"): (("acc", "_", 0), ("acc", "_", 0))},
    )
    assert atm.actions("s", "_") == (("acc", "_", 0), ("acc", "_", 0))
    assert is_binary(atm)
