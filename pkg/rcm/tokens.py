"""
Token vocabulary shared by every engine.

Tokens are plain strings. Reserved markers render as the literal strings used in
the text format, so a token sequence serializes by concatenation.
"""
import re
from typing import Iterable, Sequence, Tuple

Tokens = Tuple[str, ...]

CALL_OPEN = "<call>"
CALL_CLOSE = "</call>"
RET_OPEN = "<return>"
RET_CLOSE = "</return>"
SEP = "[SEP]"

RESERVED = frozenset({CALL_OPEN, CALL_CLOSE, RET_OPEN, RET_CLOSE, SEP})

_TOKEN_RE = re.compile(
    r"<call>|</call>|<return>|</return>|\[SEP\]|\s+|\w+|[^\w\s]"
)


def tokenize(text: str) -> Tokens:
    """Split text into tokens; ``render_tokens(tokenize(s)) == s`` always holds."""
    return tuple(_TOKEN_RE.findall(text))


def render_tokens(tokens: Iterable[str]) -> str:
    return "".join(tokens)


def call_block(payload: Sequence[str]) -> Tokens:
    return (CALL_OPEN, *payload, CALL_CLOSE)


def return_block(payload: Sequence[str]) -> Tokens:
    return (RET_OPEN, *payload, RET_CLOSE)
