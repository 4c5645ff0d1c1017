from pathlib import Path

import pytest

from rcm.machines import load_machine
from rcm.sat import parse_dimacs

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def golden(name: str) -> str:
    return (FIXTURES / "golden" / name).read_text(encoding="utf-8")


@pytest.fixture
def parity():
    return load_machine("parity")


@pytest.fixture
def palindrome():
    return load_machine("palindrome")


@pytest.fixture
def countdown():
    return load_machine("countdown")


@pytest.fixture
def boolean_eval():
    return load_machine("boolean_eval")


@pytest.fixture
def five_scientists():
    return parse_dimacs((FIXTURES / "sat" / "five_scientists.cnf").read_text(encoding="utf-8"))


@pytest.fixture
def five_scientists_problem():
    return (FIXTURES / "sat" / "five_scientists_problem.txt").read_text(encoding="utf-8")


class Scripted:
    """Generator replaying canned continuations in order, recording each view"""

    def __init__(self, *outputs):
        self.outputs = list(outputs)
        self.views = []

    def __call__(self, view):
        self.views.append(tuple(view))
        return self.outputs.pop(0)


@pytest.fixture
def scripted():
    return Scripted
