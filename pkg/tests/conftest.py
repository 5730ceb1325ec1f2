from __future__ import annotations

from datetime import datetime, timezone

import pytest

from pollsim import synth
from pollsim.backends import BackendConfig, TransportError, make_backend
from pollsim.corpus import Post
from pollsim.sampler import VoterProfile


@pytest.fixture
def instrument():
    return synth.desk_instrument()


@pytest.fixture
def mock_backend():
    return make_backend(
        BackendConfig(backend_id="mock-a", mock=True, mock_seed=1, max_tokens=64)
    )


class FailingBackend:
    """Transport always fails; used to exercise retry/fallback paths."""

    backend_id = "down"
    config = BackendConfig(backend_id="down", mock=True)

    def complete(self, messages, temperature=None, max_tokens=None):
        raise TransportError("connection refused")


class ScriptedBackend:
    """Returns canned responses via a user-supplied function of the prompt."""

    def __init__(self, reply_fn, backend_id="scripted"):
        self._reply_fn = reply_fn
        self.backend_id = backend_id
        self.config = BackendConfig(backend_id=backend_id, mock=True)
        self.calls = 0

    def complete(self, messages, temperature=None, max_tokens=None):
        self.calls += 1
        return self._reply_fn("\n".join(str(m.get("content", "")) for m in messages))


@pytest.fixture
def failing_backend():
    return FailingBackend()


def ts(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00")).astimezone(timezone.utc)


def make_voter(
    user_id: str = "v0001",
    state: str = "Alderton",
    partisanship: str = "Democrat",
    n_posts: int = 3,
) -> VoterProfile:
    posts = [
        Post(
            tweet_id=f"{user_id}-t{i}",
            text=f"thought number {i} about issue {i}",
            pub_time=ts(f"2020-0{1 + i}-15T12:00:00Z"),
        )
        for i in range(n_posts)
    ]
    return VoterProfile(
        user_id=user_id,
        state=state,
        tags={
            "gender": "Female",
            "age": "Youth",
            "race": "White",
            "ideology": "Liberal",
            "partisanship": partisanship,
        },
        post_history=posts,
    )
