import json
import os
from pathlib import Path

import pytest

import adeye

ROOT = Path(os.environ.get("ADEYE_SOURCE_DIR", Path(__file__).resolve().parents[2]))
SCENARIOS = ROOT / "scenarios"


def golden():
    entries = json.loads((SCENARIOS / "golden.json").read_text())["entries"]
    return {Path(e["scenario"]).name: e for e in entries}


def test_rng_vectors():
    assert adeye.splitmix64_mix(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF
    assert adeye.fnv1a64(b"lidar") == 0x29B704A9D5124E35
    assert adeye.derive_run_seed(42, 0) == 0xBDD732262FEB6E95
    assert adeye.derive_run_seed(2**64 - 1, 3) == 0x6D1DB36CCBA982D2
    r = adeye.Rng(0)
    assert [r.next_u64() for _ in range(2)] == [0x99EC5F36CB75F2B4, 0xBF6E1F784956452A]
    r = adeye.Rng(42)
    assert r.uniform() == pytest.approx(0.08386297105988216, abs=1e-15)


def test_envelope_closed_form():
    v = 10.0
    expected = 1.0 + v * 0.1 + v * v / 12.0 + v * 6.0 / 20.0
    assert adeye.braking_envelope(v) == pytest.approx(expected, abs=1e-12)


def test_validate_and_errors(tmp_path):
    assert adeye.validate(str(SCENARIOS / "fault-matrix.json"))["runs"] == 12
    bad = tmp_path / "bad.json"
    bad.write_text('{"format_version": 1, "name": "x", "name": "y"}')
    with pytest.raises(adeye.ValidationError):
        adeye.validate(str(bad))


def test_run_matches_golden_and_replays():
    entry = golden()["silent-nominal.json"]
    out = adeye.run(str(SCENARIOS / "silent-nominal.json"))
    assert out["report"]["digest"] == entry["digest"]
    assert adeye.trace_digest(out["trace"]) == entry["digest"]
    assert adeye.compute_metrics(out["trace"]) == out["report"]
    check = adeye.replay_check(out["trace"])
    assert check["digest_matches"] and check["invariants_hold"]


def test_tampered_trace_fails_replay():
    out = adeye.run(str(SCENARIOS / "silent-nominal.json"))
    lines = out["trace"].splitlines(keepends=True)
    i = next(k for k, l in enumerate(lines) if l.startswith('{"active_faults"'))
    lines[i] = lines[i].replace('"tick":', '"tick": ', 1)
    assert not adeye.replay_check("".join(lines))["digest_matches"]


def test_seed_override_changes_run():
    a = adeye.run(str(SCENARIOS / "pedestrian-crossing.json"), seed=1)
    b = adeye.run(str(SCENARIOS / "pedestrian-crossing.json"), seed=1)
    c = adeye.run(str(SCENARIOS / "pedestrian-crossing.json"), seed=2)
    assert a["trace"] == b["trace"]
    assert a["report"]["seed"] == 1 and c["report"]["seed"] == 2


def test_map_and_sweep(tmp_path):
    maps = adeye.build_map(str(SCENARIOS / "ascii-town.json"), out_dir=str(tmp_path))
    assert maps["pointmap"] and maps["lanemap"]
    assert any(tmp_path.iterdir())
    rep = adeye.sweep(str(SCENARIOS / "fault-matrix.json"), out_dir=str(tmp_path / "sw"))
    assert len(rep["rows"]) == 12
    again = adeye.sweep(str(SCENARIOS / "fault-matrix.json"), out_dir=str(tmp_path / "sw"), resume=True)
    assert again["reused"] == 12
    assert [r["report"]["digest"] for r in again["rows"]] == [r["report"]["digest"] for r in rep["rows"]]
