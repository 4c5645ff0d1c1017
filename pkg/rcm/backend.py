"""
Generator backed by an OpenAI-compatible chat-completions endpoint.
"""
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import httpx
from django.conf import settings
from tenacity import (
    RetryError, before_sleep_log, retry, retry_if_exception_type, stop_after_attempt, wait_exponential,
)

from .exceptions import (
    BackendAuthError, BackendError, BackendTimeout, MalformedResponse, RetryExhausted, TransientFailure,
)
from .tokens import CALL_CLOSE, CALL_OPEN, RET_CLOSE, RET_OPEN, Tokens, render_tokens, tokenize

logger = logging.getLogger(__name__)

PROMPT_TEMPLATE = (
    "[Instructions]\n"
    "Solve problems recursively. Use <call> </call> to decompose the problem and "
    "<return> </return> to return the answer.\n"
    "\n"
    "[Root Problem]\n"
    "{root_problem}\n"
    "\n"
    "[Current Task]\n"
    "{current_task}"
)

TRANSIENT_STATUS = {429, 500, 502, 503, 504}
REQUIRED_STOPS = (CALL_CLOSE, RET_CLOSE)


def build_prompt(root: str, current_task: str) -> str:
    return PROMPT_TEMPLATE.format(root_problem=root, current_task=current_task)


@dataclass(frozen=True)
class BackendConfig:
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 30.0
    max_tokens: int = 1024
    stop: Tuple[str, ...] = REQUIRED_STOPS
    retries: int = 3
    backoff: float = 0.5
    temperature: float = 0.0
    rps: float = 5.0

    def __post_init__(self):
        missing = [s for s in REQUIRED_STOPS if s not in self.stop]
        if missing:
            object.__setattr__(self, "stop", tuple(self.stop) + tuple(missing))
        if self.retries < 0 or self.timeout <= 0 or self.max_tokens <= 0:
            raise ValueError("retries must be >= 0, timeout and max_tokens positive")

    @classmethod
    def from_settings(cls, **overrides) -> "BackendConfig":
        values = {
            "base_url": settings.RCM_BACKEND_BASE_URL,
            "model": settings.RCM_BACKEND_MODEL,
            "api_key_env": settings.RCM_BACKEND_API_KEY_ENV,
            "timeout": settings.RCM_BACKEND_TIMEOUT,
            "max_tokens": settings.RCM_BACKEND_MAX_TOKENS,
            "retries": settings.RCM_BACKEND_RETRIES,
            "backoff": settings.RCM_BACKEND_BACKOFF,
            "rps": settings.RCM_BACKEND_RPS,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise BackendAuthError(f"environment variable {self.api_key_env} is not set")
        return key


class TokenBucket:
    """Thread-safe requests-per-second limiter shared by concurrent runs"""

    def __init__(self, rate: float, capacity: Optional[float] = None):
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._tokens = self.capacity
        self._updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self):
        if self.rate <= 0:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._updated) * self.rate)
                self._updated = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.rate
            time.sleep(wait)


_buckets: Dict[float, TokenBucket] = {}
_buckets_lock = threading.Lock()


def shared_bucket(rate: float) -> TokenBucket:
    with _buckets_lock:
        if rate not in _buckets:
            _buckets[rate] = TokenBucket(rate)
        return _buckets[rate]


def apply_stop(content: str, finish_reason: Optional[str], stops: Sequence[str]) -> str:
    """Cut at the first stop sequence and keep the marker.

    Endpoints strip the matched stop sequence; when the text ends inside an
    open block and the endpoint reports a stop, the matching closer is put back.
    """
    hits = [(content.find(stop), stop) for stop in stops if stop in content]
    if hits:
        index, stop = min(hits)
        return content[:index + len(stop)]
    if finish_reason == "stop":
        call_at, ret_at = content.rfind(CALL_OPEN), content.rfind(RET_OPEN)
        if max(call_at, ret_at) >= 0:
            return content + (CALL_CLOSE if call_at > ret_at else RET_CLOSE)
    return content


def _request_body(cfg: BackendConfig, prompt: str, prefix: str) -> dict:
    messages = [{"role": "user", "content": prompt}]
    if prefix:
        messages.append({"role": "assistant", "content": prefix})
    return {
        "model": cfg.model,
        "messages": messages,
        "max_tokens": cfg.max_tokens,
        "temperature": cfg.temperature,
        "stop": list(cfg.stop),
    }


def _parse_choice(response: httpx.Response) -> Tuple[str, Optional[str]]:
    try:
        data = response.json()
        choice = data["choices"][0]
        content = choice["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"response does not follow the chat-completions schema: {exc}") from exc
    if not isinstance(content, str):
        raise MalformedResponse("message content is not a string")
    return content, choice.get("finish_reason")


def complete(cfg: BackendConfig, prompt: str, prefix: str = "",
             client: Optional[httpx.Client] = None, bucket: Optional[TokenBucket] = None) -> str:
    """Continuation for ``prompt`` (and an optional assistant prefix), cut at the first stop."""
    url = f"{cfg.base_url.rstrip('/')}/chat/completions"
    headers = {"Authorization": f"Bearer {cfg.api_key()}", "Content-Type": "application/json"}
    body = _request_body(cfg, prompt, prefix)
    bucket = bucket or shared_bucket(cfg.rps)
    owned = client is None
    client = client or httpx.Client(timeout=cfg.timeout)

    @retry(
        retry=retry_if_exception_type(TransientFailure),
        stop=stop_after_attempt(cfg.retries + 1),
        wait=wait_exponential(multiplier=cfg.backoff),
        before_sleep=before_sleep_log(logger, logging.WARNING),
    )
    def attempt() -> str:
        bucket.acquire()
        try:
            response = client.post(url, headers=headers, json=body, timeout=cfg.timeout)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"no response from {url} within {cfg.timeout}s") from exc
        except httpx.TransportError as exc:
            raise TransientFailure(f"transport error: {exc}") from exc
        if response.status_code in (401, 403):
            raise BackendAuthError(f"endpoint rejected credentials ({response.status_code})")
        if response.status_code in TRANSIENT_STATUS:
            raise TransientFailure(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            raise BackendError(f"endpoint answered {response.status_code}: {response.text[:200]}")
        content, finish_reason = _parse_choice(response)
        return apply_stop(content, finish_reason, cfg.stop)

    try:
        return attempt()
    except RetryError as exc:
        attempts = exc.last_attempt.attempt_number
        raise RetryExhausted(f"{attempts} attempts failed, last: {exc.last_attempt.exception()}", attempts) from None
    finally:
        if owned:
            client.close()


@dataclass
class LlmGenerator:
    """Runs a remote model as a context-stack generator.

    Only the active frame is sent: its first line is the current task and the
    rest is the assistant prefix to continue from.
    """
    cfg: BackendConfig
    root_problem: str
    prompt: Tokens = ()
    prefixed: bool = False
    client: Optional[httpx.Client] = None
    requests: int = field(default=0, init=False)

    def __call__(self, view: Tokens) -> Tokens:
        frame = view
        if self.prefixed and self.prompt and view[:len(self.prompt)] == self.prompt:
            frame = view[len(self.prompt):] or view
        text = render_tokens(frame)
        task, _, prefix = text.partition("\n")
        self.requests += 1
        content = complete(self.cfg, build_prompt(self.root_problem, task), prefix, client=self.client)
        if not text.endswith("\n") and not content.startswith("\n"):
            content = "\n" + content
        return tokenize(content)
