"""Black-box access to span-prediction models over HTTP/JSON, plus a
deterministic mock model for tests and offline runs.

Wire protocol: POST /predict with {"context": ..., "question": ...};
response carries "answer" plus either full distributions
("tokens", "start_probs", "end_probs") or only the top probabilities
("num_tokens", "start_top_prob", "end_top_prob").
"""
from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable

import requests

from .textops import tokenize

PROB_SUM_TOLERANCE = 1e-6
DEFAULT_TIMEOUT = 60.0
DEFAULT_RETRIES = 3
BACKOFF_BASE = 0.5  # seconds; doubles per attempt


class TransportError(Exception):
    """Endpoint unreachable or persistently failing after bounded retries."""


class ProtocolError(Exception):
    """Response payload violates the span-distribution invariants."""


@dataclass(frozen=True)
class ModelRequest:
    context: str
    question: str

    def __post_init__(self):
        if not self.context or not self.question:
            raise ValueError("context and question must be nonempty")


@dataclass(frozen=True)
class FullDistribution:
    tokens: tuple[str, ...]
    start_probs: tuple[float, ...]
    end_probs: tuple[float, ...]

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)

    def validate(self) -> None:
        n = len(self.tokens)
        if n < 1:
            raise ProtocolError("empty token list")
        for name, probs in (("start", self.start_probs), ("end", self.end_probs)):
            if len(probs) != n:
                raise ProtocolError(f"{name}_probs length {len(probs)} != {n} tokens")
            if any(p < 0 for p in probs):
                raise ProtocolError(f"negative probability in {name}_probs")
            total = sum(probs)
            if abs(total - 1.0) > PROB_SUM_TOLERANCE:
                raise ProtocolError(f"{name}_probs sum to {total}, expected 1")


@dataclass(frozen=True)
class TopOnlyDistribution:
    num_tokens: int
    start_top_prob: float
    end_top_prob: float

    def validate(self) -> None:
        if self.num_tokens < 1:
            raise ProtocolError("num_tokens must be >= 1")
        for name, p in (("start_top_prob", self.start_top_prob),
                        ("end_top_prob", self.end_top_prob)):
            if not 0.0 < p <= 1.0:
                raise ProtocolError(f"{name} {p} outside (0, 1]")


SpanDistribution = FullDistribution | TopOnlyDistribution


@dataclass(frozen=True)
class ModelResponse:
    answer_text: str
    distribution: SpanDistribution


Predictor = Callable[[ModelRequest], ModelResponse]


def parse_response(payload: Any) -> ModelResponse:
    """Validate a wire response at the trust boundary."""
    if not isinstance(payload, dict) or "answer" not in payload:
        raise ProtocolError('response missing "answer"')
    if "tokens" in payload:
        try:
            dist: SpanDistribution = FullDistribution(
                tokens=tuple(payload["tokens"]),
                start_probs=tuple(float(p) for p in payload["start_probs"]),
                end_probs=tuple(float(p) for p in payload["end_probs"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad full distribution: {exc}") from exc
    else:
        try:
            dist = TopOnlyDistribution(
                num_tokens=int(payload["num_tokens"]),
                start_top_prob=float(payload["start_top_prob"]),
                end_top_prob=float(payload["end_top_prob"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad top-only distribution: {exc}") from exc
    dist.validate()
    return ModelResponse(answer_text=str(payload["answer"]), distribution=dist)


def predict(endpoint: str, req: ModelRequest, *,
            timeout: float = DEFAULT_TIMEOUT,
            retries: int = DEFAULT_RETRIES,
            session: requests.Session | None = None) -> ModelResponse:
    """POST the request to the endpoint, with bounded exponential-backoff
    retries on transport failure. Invariant violations in the payload are
    protocol errors and are not retried."""
    url = endpoint.rstrip("/") + "/predict"
    body = {"context": req.context, "question": req.question}
    http = session or requests
    last_error: Exception | None = None
    for attempt in range(retries + 1):
        try:
            resp = http.post(url, json=body, timeout=timeout)
        except requests.RequestException as exc:
            last_error = exc
            if attempt < retries:
                time.sleep(BACKOFF_BASE * (2 ** attempt))
            continue
        if resp.status_code >= 500:
            last_error = TransportError(f"server error {resp.status_code}")
            if attempt < retries:
                time.sleep(BACKOFF_BASE * (2 ** attempt))
            continue
        if resp.status_code != 200:
            raise ProtocolError(f"endpoint returned {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"response is not JSON: {exc}") from exc
        return parse_response(payload)
    raise TransportError(
        f"{url} unreachable after {retries + 1} attempts: {last_error}")


def http_predictor(endpoint: str, *, timeout: float = DEFAULT_TIMEOUT,
                   retries: int = DEFAULT_RETRIES) -> Predictor:
    """Predictor with one connection-pooling session per calling thread,
    so callers may fan requests out concurrently."""
    local = threading.local()

    def _predict(req: ModelRequest) -> ModelResponse:
        session = getattr(local, "session", None)
        if session is None:
            session = local.session = requests.Session()
        return predict(endpoint, req, timeout=timeout, retries=retries,
                       session=session)

    return _predict


# ---------------------------------------------------------------------------
# Mock model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MockModelConfig:
    """Keyword-triggered canned answers with a tunable distribution
    sharpness in (0, 1]. Deterministic given (config, request)."""
    rules: tuple[tuple[str, str], ...] = ()
    sharpness: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.sharpness <= 1.0:
            raise ValueError("sharpness must lie in (0, 1]")

    @classmethod
    def from_dict(cls, doc: dict) -> "MockModelConfig":
        rules = tuple((r["keyword"], r["answer"]) for r in doc.get("rules", []))
        return cls(rules=rules, sharpness=float(doc.get("sharpness", 1.0)))


def _peaked(n: int, peak: int, mass: float) -> tuple[float, ...]:
    if n == 1:
        return (1.0,)
    rest = (1.0 - mass) / (n - 1)
    return tuple(mass if i == peak else rest for i in range(n))


def mock_predict(cfg: MockModelConfig, req: ModelRequest) -> ModelResponse:
    """First rule whose keyword occurs as a token in the context wins; the
    full distribution puts ``sharpness`` mass on the matched token index.
    Without a match the answer falls back to the first context token under
    a flatter distribution."""
    tokens = tokenize(req.context)
    if not tokens:
        return ModelResponse(
            answer_text="",
            distribution=TopOnlyDistribution(1, 1.0, 1.0))
    words = [t.text for t in tokens]
    n = len(words)
    for keyword, answer in cfg.rules:
        if keyword in words:
            start = words.index(keyword)
            end = min(start + max(len(tokenize(answer)), 1) - 1, n - 1)
            return ModelResponse(
                answer_text=answer,
                distribution=FullDistribution(
                    tokens=tuple(words),
                    start_probs=_peaked(n, start, cfg.sharpness),
                    end_probs=_peaked(n, end, cfg.sharpness),
                ))
    fallback_mass = max(cfg.sharpness / 2, 1.0 / n)
    return ModelResponse(
        answer_text=words[0],
        distribution=FullDistribution(
            tokens=tuple(words),
            start_probs=_peaked(n, 0, fallback_mass),
            end_probs=_peaked(n, 0, fallback_mass),
        ))


def mock_predictor(cfg: MockModelConfig) -> Predictor:
    def _predict(req: ModelRequest) -> ModelResponse:
        return mock_predict(cfg, req)

    return _predict


# ---------------------------------------------------------------------------
# Mock HTTP server
# ---------------------------------------------------------------------------

def _response_to_payload(resp: ModelResponse) -> dict[str, Any]:
    payload: dict[str, Any] = {"answer": resp.answer_text}
    dist = resp.distribution
    if isinstance(dist, FullDistribution):
        payload.update(tokens=list(dist.tokens),
                       start_probs=list(dist.start_probs),
                       end_probs=list(dist.end_probs))
    else:
        payload.update(num_tokens=dist.num_tokens,
                       start_top_prob=dist.start_top_prob,
                       end_top_prob=dist.end_top_prob)
    return payload


class _MockHandler(BaseHTTPRequestHandler):
    config: MockModelConfig = MockModelConfig()

    def log_message(self, fmt, *args):  # quiet test output
        pass

    def _send(self, code: int, doc: dict) -> None:
        body = json.dumps(doc).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/healthz":
            self._send(200, {"model": "advspan-mock"})
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/predict":
            self._send(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            doc = json.loads(self.rfile.read(length))
            req = ModelRequest(context=doc["context"], question=doc["question"])
        except (ValueError, KeyError, TypeError) as exc:
            self._send(400, {"error": f"bad request: {exc}"})
            return
        resp = mock_predict(self.config, req)
        self._send(200, _response_to_payload(resp))


class MockServer:
    """Mock model behind the real wire protocol, for tests and the
    mock-serve CLI command."""

    def __init__(self, config: MockModelConfig, port: int = 0,
                 host: str = "127.0.0.1"):
        handler = type("Handler", (_MockHandler,), {"config": config})
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockServer":
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "MockServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
