import math

import pytest
from django.core.exceptions import ImproperlyConfigured

from rcm.exceptions import FrameParseError
from rcm.machines import Verdict, all_inputs, load_machine, run_tm, trace_tm
from rcm.recursive_tm import (
    CELL, POS, RUN, STATE, SYMBOL, CostLedger, FrameEncoding, MemoStore, RecursiveTmGenerator,
    RedisMemoStore, cost_bound, cost_report, cost_table, decide, decode_position, encode_position,
    encode_time, evaluate_frame, frame_value, halting_time, measure_invocations, next_block, parse_frame,
)
from rcm.runtime import BottomReason, RunConfig, run
from rcm.tokens import SEP, return_block


class FakeRedis:
    """Just enough of the hash commands for the memo store"""

    def __init__(self):
        self.hashes = {}

    def hget(self, name, key):
        return self.hashes.get(name, {}).get(key)

    def hsetnx(self, name, key, value):
        bucket = self.hashes.setdefault(name, {})
        if key in bucket:
            return 0
        bucket[key] = value.encode()
        return 1

    def hlen(self, name):
        return len(self.hashes.get(name, {}))


class TestEncoding:
    def test_time(self):
        assert encode_time(0) == ("0",)
        assert encode_time(6) == ("1", "1", "0")

    @pytest.mark.parametrize("p", [-5, -1, 0, 3])
    def test_position(self, p):
        assert decode_position(encode_position(p)) == p

    def test_negative_position_tokens(self):
        assert encode_position(-5) == ("-", "1", "0", "1")

    def test_frame_tokens(self):
        frame = FrameEncoding(CELL, ("1", "0"), 2, -1, (("+", "1"),))
        assert parse_frame(frame.tokens()) == frame
        assert frame.phase == 1
        assert frame.key == (CELL, 2, -1)

    @pytest.mark.parametrize("tokens", [
        ("FOO", "<sep>", "<sep>", "0"),
        (STATE, "<sep>", "1"),
        (CELL, "<sep>", "1", "<sep>", "0"),
        (STATE, "<sep>", "<sep>", "2"),
        (STATE, "<sep>", "<sep>", "0", SEP, "a", SEP, "b", SEP, "c"),
    ])
    def test_unparseable_frames(self, tokens):
        with pytest.raises(FrameParseError):
            parse_frame(tokens)

    def test_garbage_frame_ends_the_run(self, parity):
        result = run(("hello",), RecursiveTmGenerator(parity))
        assert result.outcome.reason is BottomReason.MALFORMED_OUTPUT


class TestPolicy:
    def test_state_zero_returns_initial(self, parity):
        frame = FrameEncoding(STATE, ("1",), 0).tokens()
        assert next_block(parity, frame) == return_block((SEP, "even"))

    def test_cell_zero_reads_input(self, parity):
        assert next_block(parity, FrameEncoding(CELL, ("1", "0"), 0, 1).tokens()) == return_block((SEP, "0"))
        assert next_block(parity, FrameEncoding(CELL, ("1", "0"), 0, 5).tokens()) == return_block((SEP, "_"))

    @pytest.mark.parametrize("tag, p", [(STATE, None), (POS, None), (SYMBOL, None), (CELL, 0), (CELL, 2)])
    def test_functions_match_direct_run(self, palindrome, tag, p):
        from rcm.machines import trace_tm

        x = tuple("abb")
        history = trace_tm(palindrome, x)
        for t in range(min(len(history), 5)):
            config = history[t]
            result, _ = evaluate_frame(palindrome, FrameEncoding(tag, x, t, p), memo=True)
            value = frame_value(result)
            expected = {
                STATE: (config.state,),
                POS: encode_position(config.head),
                SYMBOL: (config.read(config.head, palindrome.blank),),
                CELL: (config.read(p, palindrome.blank),) if p is not None else None,
            }[tag]
            assert value == expected, (tag, t)


class TestDecide:
    @pytest.mark.parametrize("x", ["".join(w) for w in all_inputs(("0", "1"), 3)])
    def test_parity_without_memo(self, parity, x):
        decision = decide(parity, tuple(x))
        assert decision.verdict is run_tm(parity, tuple(x)).verdict

    def test_palindrome_with_memo(self, palindrome):
        for x in all_inputs(("a", "b"), 4):
            assert decide(palindrome, x, memo=True).verdict is run_tm(palindrome, x).verdict, x

    def test_countdown_with_memo(self, countdown):
        for n in range(4):
            x = tuple(format(n, "02b"))
            assert decide(countdown, x, memo=True).verdict is Verdict.ACCEPT

    def test_memo_agrees_with_plain_evaluation(self, palindrome):
        x = tuple("ab")
        plain, memo = decide(palindrome, x), decide(palindrome, x, memo=True)
        assert plain.verdict is memo.verdict
        assert memo.ledger.total < plain.ledger.total
        assert memo.ledger.memo_hits > 0

    def test_step_limit_is_bottom(self, parity):
        decision = decide(parity, tuple("0110"), cfg=RunConfig(max_steps=50))
        assert decision.verdict is None
        assert decision.result.outcome.reason is BottomReason.LIMIT_EXCEEDED

    def test_frames_stay_logarithmic(self, palindrome):
        x = tuple("abba")
        decision = decide(palindrome, x, memo=True)
        bits = max(1, halting_time(palindrome, x).bit_length())
        assert decision.trace.max_local_space <= 2 * len(x) + 8 * bits + 24

    def test_depth_grows_with_time(self, parity):
        short = decide(parity, ("1",), memo=True).trace.max_depth
        longer = decide(parity, tuple("1011"), memo=True).trace.max_depth
        assert longer > short


class TestCost:
    def test_table_start(self):
        rows = cost_table(2)
        assert rows[0] == {"t": 0, "state": 1, "pos": 1, "cell": 1, "symbol": 3, "V": 1, "C": 1}
        assert (rows[1]["V"], rows[2]["V"]) == (6, 25)

    def test_growth_ratio(self):
        rows = cost_table(10)
        for t in range(4, 11):
            assert 3.4 <= rows[t]["V"] / rows[t - 1]["V"] <= 4.6

    def test_negative_time(self):
        with pytest.raises(ValueError):
            cost_bound(-1)

    @pytest.mark.parametrize("t", range(4))
    def test_state_and_pos_meet_the_bound(self, parity, t):
        x = tuple("11")
        assert measure_invocations(parity, x, STATE, t) <= cost_bound(t)
        assert measure_invocations(parity, x, POS, t) <= cost_bound(t)

    def test_report(self, parity):
        rows = cost_report(parity, tuple("1"), 3)
        assert [row["t"] for row in rows] == [0, 1, 2, 3]
        table = cost_table(3)
        for row in rows:
            assert row["V_measured"] <= row["bound"] == table[row["t"]]["V"]
            assert row["C_measured"] <= table[row["t"]]["C"]

    def test_memoized_cost_is_linear_in_the_table(self, countdown):
        x = tuple("11")
        store = MemoStore()
        decision = decide(countdown, x, memo_store=store)
        T = halting_time(countdown, x)
        assert decision.verdict is Verdict.ACCEPT
        assert decision.ledger.total <= 3 * len(store) + 2 * (T + 1)
        assert len(store) <= 3 * (T + 1) + (T + 1) * (2 * T + 1)

    def test_ledger_dict(self):
        ledger = CostLedger()
        ledger.count(STATE, 0)
        ledger.count(STATE, 1)
        assert ledger.as_dict() == {STATE: 2, POS: 0, CELL: 0, SYMBOL: 0, RUN: 0, "total": 2, "memo_hits": 0}


class TestRedisMemo:
    def test_shared_across_runs(self, palindrome):
        client = FakeRedis()
        first = decide(palindrome, tuple("aba"), memo_store=RedisMemoStore("pal:aba", client=client))
        again = decide(palindrome, tuple("aba"), memo_store=RedisMemoStore("pal:aba", client=client))
        assert first.verdict is again.verdict is Verdict.ACCEPT
        assert again.ledger.total < first.ledger.total

    def test_write_once(self):
        store = RedisMemoStore("ns", client=FakeRedis())
        store.put((STATE, 1, None), ("even",))
        store.put((STATE, 1, None), ("odd",))
        assert store.get((STATE, 1, None)) == ("even",)
        assert len(store) == 1

    def test_requires_a_url(self, settings):
        settings.RCM_REDIS_URL = ""
        with pytest.raises(ImproperlyConfigured):
            RedisMemoStore("ns")


@pytest.mark.slow
class TestSweeps:
    @pytest.mark.parametrize("name, alphabet", [("parity", "01"), ("palindrome", "ab"), ("increment", "01")])
    def test_decide_matches_direct_runs(self, name, alphabet):
        tm = load_machine(name)
        for x in all_inputs(tuple(alphabet), 6):
            assert decide(tm, x, memo=True).verdict is run_tm(tm, x).verdict, x

    @pytest.mark.parametrize("x", ["abb", "abba", "ba"])
    def test_every_function_value_up_to_halting(self, palindrome, x):
        x = tuple(x)
        history = trace_tm(palindrome, x)
        store = MemoStore()

        def value(tag, t, p=None):
            result, _ = evaluate_frame(palindrome, FrameEncoding(tag, x, t, p), memo_store=store)
            return frame_value(result)

        for t, config in enumerate(history):
            assert value(STATE, t) == (config.state,), t
            assert value(POS, t) == encode_position(config.head), t
            assert value(SYMBOL, t) == (config.read(config.head, palindrome.blank),), t
            for p in range(-t, t + 1):
                assert value(CELL, t, p) == (config.read(p, palindrome.blank),), (t, p)

    def test_memoized_cost_grows_quadratically(self, parity):
        totals = {}
        for n in (4, 39, 79, 159, 199):
            x = ("1",) * n
            T = halting_time(parity, x)
            decision = decide(parity, x, memo=True)
            assert decision.verdict is run_tm(parity, x).verdict
            total = decision.ledger.total
            assert T * T / 4 <= total <= 8 * (T + 1) ** 2, (T, total)
            totals[T] = total
        assert sorted(totals) == [5, 40, 80, 160, 200]
        exponent = math.log(totals[160] / totals[40]) / math.log(4)
        assert 1.4 <= exponent <= 2.3
