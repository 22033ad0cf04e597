import csv
import json
import random

import pytest

from fairshare.cli import CSV_HEADER, main
from fairshare.generate import generate, greedy_counter, random_instance, splc_mms_high
from fairshare.model import parse_instance, write_instance


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, inst in {
        "high": splc_mms_high(3),
        "counter": greedy_counter(),
        "single": parse_instance(
            '{"agents": 1, "entitlements": ["1"], "valuations": [{"kind": "additive", "weights": ["3", "2"]}]}'
        ),
        "additive": parse_instance(
            '{"agents": 2, "entitlements": ["1/2", "1/2"], "valuations": ['
            '{"kind": "additive", "weights": [3, 2, 2, 1]}, {"kind": "additive", "weights": [3, 2, 2, 1]}]}'
        ),
        "coverage": random_instance("coverage", 2, random.Random(1), m=4),
    }.items():
        p = tmp_path / f"{name}.json"
        p.write_bytes(write_instance(inst))
        paths[name] = p
    return paths


class TestGen:
    def test_reproducible(self, tmp_path, capsys):
        for d in ("a", "b"):
            assert run(capsys, "gen", "--family", "splc", "-n", 2, "-t", 2, "--seed", 7, "--count", 3, "--out", tmp_path / d)[0] == 0
        for k in range(3):
            name = f"splc-n2-s7-{k:03d}.json"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / "fixtures" / "greedy-counter.json").exists()

    def test_fixtures(self, tmp_path, capsys):
        run(capsys, "gen", "--fixture", "splc-mms-high", "-n", 3, "--out", tmp_path)
        inst = parse_instance((tmp_path / "fixtures" / "splc-mms-high.json").read_bytes())
        assert inst.n == 3 and inst.copies == (3,)
        run(capsys, "gen", "--fixture", "greedy-counter", "--out", tmp_path)
        inst = parse_instance((tmp_path / "fixtures" / "greedy-counter.json").read_bytes())
        assert inst == greedy_counter()

    def test_asymmetric_needs_profile(self, tmp_path, capsys):
        code, _, err = run(capsys, "gen", "-n", 4, "--asymmetric", "--out", tmp_path)
        assert code == 2 and "asymmetric" in err

    def test_generate_is_seeded(self):
        assert generate("additive", 2, 3, 4, m=5) == generate("additive", 2, 3, 4, m=5)


class TestShares:
    def test_fixture_all_ones(self, files, capsys):
        code, out, _ = run(capsys, "shares", "--instance", files["high"])
        assert code == 0
        doc = json.loads(out)
        assert all(a["mms"] == a["aps"] == a["mu"] == "1" for a in doc["agents"])

    def test_single_agent(self, files, capsys):
        doc = json.loads(run(capsys, "shares", "--instance", files["single"], "--which", "mms")[1])
        assert doc["agents"][0]["mms"] == "5"

    def test_additive_mms(self, files, capsys):
        doc = json.loads(run(capsys, "shares", "--instance", files["additive"], "--which", "mms")[1])
        assert [a["mms"] for a in doc["agents"]] == ["4", "4"]

    def test_over_limit(self, files, capsys):
        code, _, err = run(capsys, "shares", "--instance", files["counter"], "--which", "aps")
        assert code == 3 and "14" in err
        code, out, _ = run(capsys, "shares", "--instance", files["counter"], "--which", "mms", "--limit-mms-goods", 32)
        assert code == 0 and all(a["mms"] == "1" for a in json.loads(out)["agents"])

    def test_malformed(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"agents": 2, "entitlements": ["1/2", "1/3"], "valuations": []}')
        code, _, err = run(capsys, "shares", "--instance", bad)
        assert code == 2 and "entitlements" in err


class TestSolveVerify:
    def test_counter_half_mms(self, files, tmp_path, capsys):
        out, trace = tmp_path / "a.json", tmp_path / "t.json"
        assert run(capsys, "solve", "--instance", files["counter"], "--algo", "splc-mms", "--out", out, "--trace", trace)[0] == 0
        assert json.loads(trace.read_text())["status"] == "ok"
        code, stdout, _ = run(
            capsys, "verify", "--instance", files["counter"], "--allocation", out,
            "--factor", "1/2", "--target", "mms", "--limit-mms-goods", 32,
        )
        assert code == 0 and json.loads(stdout)["passed"]

    def test_sub_aps(self, files, tmp_path, capsys):
        out, trace = tmp_path / "a.json", tmp_path / "t.json"
        run(capsys, "solve", "--instance", files["coverage"], "--algo", "sub-aps", "--epsilon", "1/20", "--out", out, "--trace", trace)
        assert json.loads(trace.read_text())["greedy"]
        code = run(capsys, "verify", "--instance", files["coverage"], "--allocation", out, "--factor", "20/63", "--target", "aps")[0]
        assert code == 0

    def test_family_mismatch(self, files, capsys):
        code, _, err = run(capsys, "solve", "--instance", files["coverage"], "--algo", "splc-mms")
        assert code == 2 and "SPLC" in err

    def test_perfect_and_empty(self, files, tmp_path, capsys):
        perfect = tmp_path / "p.json"
        perfect.write_text('{"bundles": [[1], [1], [1]]}')
        assert run(capsys, "verify", "--instance", files["high"], "--allocation", perfect)[0] == 0
        empty = tmp_path / "e.json"
        empty.write_text('{"bundles": [[0], [0], [0]]}')
        assert run(capsys, "verify", "--instance", files["high"], "--allocation", empty, "--factor", "1/2")[0] == 1

    def test_invalid_allocation(self, files, tmp_path, capsys):
        over = tmp_path / "o.json"
        over.write_text('{"bundles": [[2], [1], [1]]}')
        code, _, err = run(capsys, "verify", "--instance", files["high"], "--allocation", over)
        assert code == 2 and "type 0" in err

    def test_target_file(self, files, tmp_path, capsys):
        alloc = tmp_path / "a.json"
        alloc.write_text('{"bundles": [[0, 1], [2, 3]]}')
        targets = tmp_path / "t.json"
        targets.write_text('{"targets": ["4", "3"]}')
        assert run(capsys, "verify", "--instance", files["additive"], "--allocation", alloc, "--target", targets)[0] == 0

    def test_stdout_output(self, files, capsys):
        code, out, _ = run(capsys, "solve", "--instance", files["high"], "--algo", "splc-mms")
        assert code == 0 and json.loads(out) == {"bundles": [[1], [1], [1]]}


class TestBench:
    def test_empty_config(self, capsys):
        code, out, _ = run(capsys, "bench")
        assert code == 0 and out == ",".join(CSV_HEADER) + "\n"

    def test_rows(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"runs": [
            {"family": "splc", "n": 2, "count": 4, "seed": 3, "size": {"t": 2}},
            {"family": "additive", "n": 3, "count": 2, "seed": 1, "size": {"m": 5}, "entitlements": "asymmetric"},
            {"family": "coverage", "n": 2, "count": 1, "seed": 1, "size": {"m": 15}},
        ]}))
        out = tmp_path / "r.csv"
        assert run(capsys, "bench", "--config", cfg, "--out", out)[0] == 0
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 7
        assert [r["id"] for r in rows] == sorted(r["id"] for r in rows)
        assert rows[-1]["worst_ratio"].startswith("over-limit")
        from fractions import Fraction

        for r in rows[:4]:
            assert Fraction(r["worst_ratio"]) >= Fraction(1, 2)
        again = tmp_path / "r2.csv"
        run(capsys, "bench", "--config", cfg, "--out", again)
        strip = lambda p: [r[:-1] for r in csv.reader(p.open())]
        assert strip(out) == strip(again)


def test_committed_fixtures_match_generators():
    from pathlib import Path

    root = Path(__file__).resolve().parent.parent / "fixtures"
    assert parse_instance((root / "splc-mms-high.json").read_bytes()) == splc_mms_high(3)
    assert parse_instance((root / "greedy-counter.json").read_bytes()) == greedy_counter()
