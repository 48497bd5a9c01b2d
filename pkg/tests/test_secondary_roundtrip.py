"""Secondary acceptance: a scripted browser-style session against the real
service downloads a trajectory the fit command ingests without error, and the
server-side 300 s timer blocks further test-phase actions."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from boxtask.cli import main
from boxtask.service import create_app
from boxtask.task import EnvConfig, Fixed, TaskSetup

from conftest import TRUE_PAIRS


class FakeClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now


SETUP = TaskSetup(EnvConfig(reliability=Fixed(rho=1.0), observability="partial", seed=0))


def play_scripted_session(client: TestClient) -> str:
    """The browser flow: create, instruction, begin, attempts + one pick-up,
    finish, four generalization choices, download."""
    created = client.post("/sessions", json={"seed": 5, "subject_id": "played"}).json()
    sid = created["session_id"]
    assert created["phase"] == "practice"
    client.post(f"/sessions/{sid}/begin-test")
    # a misled color attempt, one pick-up, then the true pairs
    client.post(
        f"/sessions/{sid}/actions",
        json={"type": "attempt", "box_id": "pink", "key_id": "pink6"},
    )
    client.post(f"/sessions/{sid}/actions", json={"type": "observe", "box_id": "purple"})
    for box, key in TRUE_PAIRS.items():
        resp = client.post(
            f"/sessions/{sid}/actions",
            json={"type": "attempt", "box_id": box, "key_id": key},
        )
        assert resp.json()["outcome"]["success"] is True
    trials = client.get(f"/sessions/{sid}/generalization").json()["trials"]
    assert len(trials) == 4
    for trial in trials:
        resp = client.post(
            f"/sessions/{sid}/generalization",
            json={"trial": trial["trial"], "key_id": trial["candidates"][2]["id"]},
        )
        assert resp.status_code == 200
    assert client.get(f"/sessions/{sid}").json()["phase"] == "done"
    return client.get(f"/sessions/{sid}/trajectory").text


class TestPlayedSessionRoundTrip:
    def test_download_feeds_the_fit_command(self, tmp_path):
        clock = FakeClock()
        client = TestClient(create_app(setup=SETUP, time_limit=300.0, clock=clock))
        csv_text = play_scripted_session(client)

        path = tmp_path / "played.csv"
        path.write_text(csv_text)
        out = tmp_path / "fit"
        code = main(
            [
                "fit",
                "--trajectories", str(path),
                "--variants", "soc-l",
                "--n-sims", "5",
                "--seed", "1",
                "--out", str(out),
            ]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["subjects"] == 1

    def test_timer_expiry_blocks_test_actions(self):
        clock = FakeClock()
        client = TestClient(create_app(setup=SETUP, time_limit=300.0, clock=clock))
        sid = client.post("/sessions", json={"seed": 5}).json()["session_id"]
        client.post(f"/sessions/{sid}/begin-test")
        clock.now = 150.0
        ok = client.post(
            f"/sessions/{sid}/actions",
            json={"type": "attempt", "box_id": "red", "key_id": "red1"},
        )
        assert ok.status_code == 200
        clock.now = 300.5
        blocked = client.post(
            f"/sessions/{sid}/actions",
            json={"type": "attempt", "box_id": "pink", "key_id": "grey2"},
        )
        assert blocked.status_code == 410
        assert client.get(f"/sessions/{sid}").json()["phase"] == "generalization"
        print(
            "[PASS] played-session round-trip — download ingested by fit; "
            "410 after 300 s"
        )
