from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from pollsim.backends import (
    BackendConfig,
    HTTPBackend,
    MockBackend,
    RecordedBackend,
    RecordingBackend,
    RetryPolicy,
    TransportError,
    make_backend,
    request_hash,
)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            BackendConfig(backend_id="x", temperature=-0.1)
        with pytest.raises(ValueError):
            BackendConfig(backend_id="x", max_tokens=0)

    def test_from_file_round_trip(self, tmp_path):
        path = tmp_path / "backend.json"
        path.write_text(
            json.dumps(
                {
                    "backend_id": "live",
                    "endpoint": "http://example/v1/chat/completions",
                    "model": "m",
                    "temperature": 0.5,
                    "max_tokens": 32,
                    "retry": {"max_attempts": 2, "backoff_seconds": 0.01},
                }
            )
        )
        config = BackendConfig.from_file(path)
        assert config.retry.max_attempts == 2
        assert isinstance(make_backend(config), HTTPBackend)

    def test_factory_dispatch(self, tmp_path):
        assert isinstance(make_backend(BackendConfig(backend_id="m", mock=True)), MockBackend)
        recorded = tmp_path / "rec.json"
        recorded.write_text("{}")
        config = BackendConfig(backend_id="r", recorded_path=str(recorded))
        assert isinstance(make_backend(config), RecordedBackend)


class TestMockDeterminism:
    def test_same_messages_same_reply(self):
        mock = MockBackend(BackendConfig(backend_id="m", mock=True, mock_seed=3))
        messages = [{"role": "user", "content": "anything at all"}]
        assert mock.complete(messages) == mock.complete(messages)

    def test_different_seed_may_differ(self):
        messages = [
            {
                "role": "user",
                "content": "Question: q\nOptions: A. one\nB. two\nC. three\n"
                "you only need to answer the option letter number",
            }
        ]
        replies = {
            MockBackend(BackendConfig(backend_id="m", mock=True, mock_seed=s)).complete(messages)
            for s in range(8)
        }
        assert len(replies) > 1


class TestRecording:
    def test_record_then_replay(self, tmp_path):
        config = BackendConfig(backend_id="m", mock=True, mock_seed=4)
        live = MockBackend(config)
        tape = tmp_path / "tape.json"
        recorder = RecordingBackend(live, tape)
        messages = [{"role": "user", "content": "hello there"}]
        first = recorder.complete(messages)
        assert recorder.complete(messages) == first  # served from the tape

        replay = RecordedBackend(
            BackendConfig(backend_id="replay", recorded_path=str(tape))
        )
        assert replay.complete(messages) == first

    def test_replay_miss_is_transport_error(self, tmp_path):
        tape = tmp_path / "tape.json"
        tape.write_text("{}")
        replay = RecordedBackend(BackendConfig(backend_id="r", recorded_path=str(tape)))
        with pytest.raises(TransportError, match="no recorded response"):
            replay.complete([{"role": "user", "content": "unseen"}])

    def test_request_hash_sensitive_to_all_fields(self):
        messages = [{"role": "user", "content": "x"}]
        base = request_hash("m", messages, 0.5, 32)
        assert request_hash("m", messages, 0.0, 32) != base
        assert request_hash("m", messages, 0.5, 64) != base
        assert request_hash("other", messages, 0.5, 32) != base


class _FlakyHandler(BaseHTTPRequestHandler):
    failures = 2
    calls = 0

    def do_POST(self):
        _FlakyHandler.calls += 1
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        if _FlakyHandler.calls <= _FlakyHandler.failures:
            self.send_response(500)
            self.end_headers()
            return
        reply = {
            "choices": [
                {"message": {"role": "assistant", "content": f"echo:{body['model']}"}}
            ]
        }
        payload = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def flaky_server():
    _FlakyHandler.calls = 0
    server = HTTPServer(("127.0.0.1", 0), _FlakyHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestHTTPBackend:
    def _config(self, url, attempts=3):
        return BackendConfig(
            backend_id="live",
            endpoint=url,
            model="test-model",
            retry=RetryPolicy(max_attempts=attempts, backoff_seconds=0.01),
        )

    def test_retries_through_transient_failures(self, flaky_server):
        backend = HTTPBackend(self._config(flaky_server, attempts=3))
        reply = backend.complete([{"role": "user", "content": "hi"}])
        assert reply == "echo:test-model"
        assert _FlakyHandler.calls == 3

    def test_gives_up_after_max_attempts(self, flaky_server):
        _FlakyHandler.failures = 10
        try:
            backend = HTTPBackend(self._config(flaky_server, attempts=2))
            with pytest.raises(TransportError):
                backend.complete([{"role": "user", "content": "hi"}])
            assert _FlakyHandler.calls == 2
        finally:
            _FlakyHandler.failures = 2
