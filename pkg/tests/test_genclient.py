import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

import lfqa_eval.genclient as genclient
from lfqa_eval.genclient import (
    BackendConfig,
    CredentialError,
    FixtureConflictError,
    FixtureError,
    FixtureStore,
    GenerationClient,
    GenerationError,
    GenerationRequest,
    generate,
    record_fixture,
)


# ---------------------------------------------------------------------------
# stub chat-completion server


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        try:
            self._respond()
        except BrokenPipeError:
            pass  # client gave up (timeout tests)

    def _respond(self):
        server = self.server
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        with server.lock:
            server.requests.append(
                {"body": body, "auth": self.headers.get("Authorization")}
            )
            behavior = server.script.pop(0) if server.script else {"status": 200}
            server.active += 1
            server.peak_active = max(server.peak_active, server.active)
        if behavior.get("sleep"):
            time.sleep(behavior["sleep"])
        with server.lock:
            server.active -= 1
        status = behavior.get("status", 200)
        if "raw" in behavior:
            payload = behavior["raw"].encode()
        else:
            n = body.get("n", 1)
            prefix = behavior.get("prefix", "reply")
            with server.lock:
                server.calls += 1
                call = server.calls
            choices = [
                {
                    "message": {"content": f"{prefix} {call}.{i}"},
                    "finish_reason": behavior.get("finish_reason", "stop"),
                }
                for i in range(n)
            ]
            payload = json.dumps({"choices": choices}).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.script = []
    server.requests = []
    server.calls = 0
    server.active = 0
    server.peak_active = 0
    server.lock = threading.Lock()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()


def _http_config(server, **kw) -> BackendConfig:
    defaults = dict(
        kind="http",
        endpoint_url=f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions",
        model_name="stub-model",
        timeout=2.0,
        max_retries=2,
    )
    defaults.update(kw)
    return BackendConfig(**defaults)


@pytest.fixture(autouse=True)
def _fast_backoff(monkeypatch):
    monkeypatch.setattr(genclient, "BACKOFF_BASE", 0.0)


def _request(**kw) -> GenerationRequest:
    defaults = dict(prompt="hello", max_tokens=16, temperature=0.1)
    defaults.update(kw)
    return GenerationRequest(**defaults)


# ---------------------------------------------------------------------------
# scripted backend


def test_scripted_single_sample(tmp_path):
    store = FixtureStore(tmp_path)
    store.record("hello", ["ok"])
    config = BackendConfig(kind="scripted", fixture_dir=str(tmp_path))
    result = generate(config, _request())
    assert result.texts == ["ok"]
    assert result.truncated == [False]


def test_scripted_three_samples_in_fixture_order(tmp_path):
    store = FixtureStore(tmp_path)
    store.record("hello", ["a", "b", "c"])
    config = BackendConfig(kind="scripted", fixture_dir=str(tmp_path))
    result = generate(config, _request(n_samples=3))
    assert result.texts == ["a", "b", "c"]


def test_scripted_cycles_when_fixture_is_short(tmp_path):
    FixtureStore(tmp_path).record("hello", ["a", "b"])
    config = BackendConfig(kind="scripted", fixture_dir=str(tmp_path))
    result = generate(config, _request(n_samples=5))
    assert result.texts == ["a", "b", "a", "b", "a"]


def test_scripted_missing_fixture(tmp_path):
    config = BackendConfig(kind="scripted", fixture_dir=str(tmp_path))
    with pytest.raises(FixtureError, match="digest"):
        generate(config, _request(prompt="never recorded"))


def test_scripted_deterministic_sequence(tmp_path):
    store = FixtureStore(tmp_path)
    store.record("p1", ["x"])
    store.record("p2", ["y", "z"])
    config = BackendConfig(kind="scripted", fixture_dir=str(tmp_path))
    client = GenerationClient(config)
    first = [client.generate(_request(prompt=p, n_samples=2)).texts for p in ("p1", "p2")]
    second = [client.generate(_request(prompt=p, n_samples=2)).texts for p in ("p1", "p2")]
    assert first == second == [["x", "x"], ["y", "z"]]


def test_record_fixture_round_trip_and_conflict(tmp_path):
    store = FixtureStore(tmp_path)
    record_fixture(store, "p", ["a"])
    record_fixture(store, "p", ["a"])  # same payload: idempotent
    assert store.lookup("p") == ["a"]
    with pytest.raises(FixtureConflictError):
        record_fixture(store, "p", ["b"])
    record_fixture(store, "q", ["b"])
    assert store.lookup("q") == ["b"]  # prompts are independent


def test_fixture_digest_is_exact_prompt_hash(tmp_path):
    store = FixtureStore(tmp_path)
    store.record("p", ["a"])
    with pytest.raises(FixtureError):
        store.lookup("p ")  # trailing whitespace is a different prompt


# ---------------------------------------------------------------------------
# http backend


def test_http_single_call_body_and_result(stub_server, monkeypatch):
    monkeypatch.setenv("STUB_KEY", "secret-token")
    config = _http_config(stub_server, auth_env="STUB_KEY")
    result = generate(config, _request(n_samples=2, stop_sequences=("###",)))
    assert result.texts == ["reply 1.0", "reply 1.1"]
    assert result.backend_id == "http:stub-model"
    sent = stub_server.requests[0]
    assert sent["auth"] == "Bearer secret-token"
    assert sent["body"]["model"] == "stub-model"
    assert sent["body"]["messages"] == [{"role": "user", "content": "hello"}]
    assert sent["body"]["n"] == 2
    assert sent["body"]["stop"] == ["###"]


def test_http_missing_credential_no_network_call(stub_server, monkeypatch):
    monkeypatch.delenv("STUB_KEY", raising=False)
    config = _http_config(stub_server, auth_env="STUB_KEY")
    with pytest.raises(CredentialError, match="STUB_KEY"):
        generate(config, _request())
    assert stub_server.requests == []


def test_http_retries_transient_then_succeeds(stub_server):
    stub_server.script = [{"status": 500}, {"status": 429}, {"status": 200}]
    config = _http_config(stub_server, max_retries=2)
    result = generate(config, _request())
    assert len(result.texts) == 1
    assert len(stub_server.requests) == 3


def test_http_gives_up_after_max_retries(stub_server):
    stub_server.script = [{"status": 500}] * 5
    config = _http_config(stub_server, max_retries=1)
    with pytest.raises(GenerationError, match="after 2 attempts"):
        generate(config, _request())
    assert len(stub_server.requests) == 2


def test_http_auth_error_never_retried(stub_server, monkeypatch):
    monkeypatch.setenv("STUB_KEY", "secret-token")
    stub_server.script = [{"status": 401}]
    config = _http_config(stub_server, auth_env="STUB_KEY")
    with pytest.raises(CredentialError) as err:
        generate(config, _request())
    assert len(stub_server.requests) == 1
    assert "secret-token" not in str(err.value)  # credential never leaks


def test_http_schema_violation_not_retried(stub_server):
    stub_server.script = [{"raw": json.dumps({"unexpected": []})}]
    config = _http_config(stub_server)
    with pytest.raises(GenerationError, match="schema violation"):
        generate(config, _request())
    assert len(stub_server.requests) == 1


def test_http_truncated_flag(stub_server):
    stub_server.script = [{"finish_reason": "length"}]
    config = _http_config(stub_server)
    result = generate(config, _request())
    assert result.truncated == [True]


def test_http_fan_out_without_native_n(stub_server):
    config = _http_config(stub_server, native_n=False, max_in_flight=1)
    result = generate(config, _request(n_samples=3))
    # three independent calls, results in request order
    assert result.texts == ["reply 1.0", "reply 2.0", "reply 3.0"]
    assert all(req["body"].get("n") is None for req in stub_server.requests)
    assert len(stub_server.requests) == 3


def test_http_fan_out_respects_max_in_flight(stub_server):
    stub_server.script = [{"sleep": 0.05}] * 8
    config = _http_config(stub_server, native_n=False, max_in_flight=2)
    result = generate(config, _request(n_samples=8))
    assert len(result.texts) == 8
    assert stub_server.peak_active <= 2


def test_http_timeout_retries(stub_server):
    stub_server.script = [{"sleep": 1.0}, {"status": 200}]
    config = _http_config(stub_server, timeout=0.2, max_retries=2)
    result = generate(config, _request())
    assert len(result.texts) == 1


# ---------------------------------------------------------------------------
# request/config validation


def test_request_validation():
    with pytest.raises(ValueError):
        _request(max_tokens=0)
    with pytest.raises(ValueError):
        _request(n_samples=0)
    with pytest.raises(ValueError):
        _request(temperature=-0.5)


def test_config_validation():
    with pytest.raises(ValueError, match="endpoint_url"):
        BackendConfig(kind="http").validate()
    with pytest.raises(ValueError, match="fixture_dir"):
        BackendConfig(kind="scripted").validate()
    with pytest.raises(ValueError, match="kind"):
        BackendConfig(kind="carrier-pigeon").validate()
