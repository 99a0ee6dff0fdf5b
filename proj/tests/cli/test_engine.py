"""End-to-end checks of the engine binary: eval, features, digest and an HTTP session via serve."""

import json
import os
import re
import subprocess
import urllib.error
import urllib.request
from pathlib import Path

import pytest

ENGINE = os.environ["ENGINE_TEST_BINARY"]
CORPUS = Path(os.environ["ENGINE_TEST_CORPUS"])
FIXTURES = Path(os.environ["ENGINE_TEST_FIXTURES"])
LESION_PNG = FIXTURES / "images" / "lesion.png"


def run(*args, check=True):
    return subprocess.run([ENGINE, *map(str, args)], capture_output=True, text=True, check=check, timeout=300)


def test_eval_writes_report_and_table(tmp_path):
    out = tmp_path / "report.json"
    proc = run("eval", "--corpus", CORPUS, "--reviews", CORPUS / "reviews.csv", "--out", out)
    assert "Capability" in proc.stdout
    report = json.loads(out.read_text())
    assert report["case_count"] == 73
    assert abs(report["capability"] - 0.86) <= 0.01
    assert report["rows"]["nli_entailment"]["context_count"] == 63


def test_eval_rejects_bad_reviews(tmp_path):
    bad = tmp_path / "reviews.csv"
    bad.write_text("case-001,6,4,x\ncase-002,five,4,y\n")
    proc = run("eval", "--corpus", CORPUS, "--reviews", bad, check=False)
    assert proc.returncode == 1
    assert "reviews.csv:1" in proc.stderr and "reviews.csv:2" in proc.stderr


def test_features_and_plots(tmp_path):
    proc = run("features", "--image", LESION_PNG, "--plots", tmp_path)
    area = re.search(r"Lesion area \(px\^2\): (\d+)", proc.stdout)
    assert area and int(area.group(1)) > 1000
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "asymmetry_major.png", "asymmetry_minor.png", "color_histogram.png", "outline.png"]
    assert run("features", "--image", FIXTURES / "images" / "not_image.txt", check=False).returncode == 1


def request(base, method, path, body=None, content_type="application/json"):
    req = urllib.request.Request(base + path, data=body, method=method, headers={"Content-Type": content_type})
    try:
        with urllib.request.urlopen(req, timeout=120) as res:
            return res.status, json.loads(res.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


@pytest.fixture
def server(tmp_path):
    fixtures = tmp_path / "fixtures"
    fixtures.mkdir()
    responses = FIXTURES / "responses"
    vision = {}
    for prompt, name in (("lesion", "condition_initial.txt"), ("condition", "condition_followup.txt")):
        digest = run("digest", "--image", LESION_PNG, "--prompt", prompt).stdout.split()[1]
        vision[digest] = {"text": (responses / name).read_text()}
    (fixtures / "vision.json").write_text(json.dumps(vision))
    config = tmp_path / "dermflow.json"
    config.write_text(json.dumps({
        "listen": {"port": 0},
        "providers": {"fixtures_dir": "fixtures", "initial_backoff_ms": 0},
        "store": {"dir": "store"},
    }))
    proc = subprocess.Popen([ENGINE, "serve", "--config", str(config)], stdout=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline()
        port = int(re.search(r":(\d+) ", line).group(1))
        yield f"http://127.0.0.1:{port}", tmp_path / "store"
    finally:
        proc.terminate()
        assert proc.wait(timeout=30) == 0


def test_serve_condition_session(server):
    base, store = server
    status, body = request(base, "GET", "/health")
    assert status == 200
    status, created = request(base, "POST", "/cases", LESION_PNG.read_bytes(), "image/png")
    assert status == 201 and created["state"] == "Created"
    case = "/cases/" + created["id"]
    status, doc = request(base, "POST", case + "/analyze")
    assert status == 200, doc
    assert doc["artifacts"]["path"]["path"] == "condition"
    status, err = request(base, "POST", case + "/xai")
    assert status == 409 and err["error"]["code"] == "illegal_transition"
    status, doc = request(base, "POST", case + "/followup")
    assert status == 200 and doc["state"] == "ConditionFollowedUp"
    status, doc = request(base, "GET", case + "/report")
    assert status == 200 and [t["to"] for t in doc["audit"]] == ["InitialAnalyzed", "ConditionFollowedUp"]
    assert (store / "cases" / created["id"] / "case.json").exists()
