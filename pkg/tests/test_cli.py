import io
import json
from fractions import Fraction

import pytest

from tools.bench import SUITES
from tools.commands import dispatch
from utils.arg_parser import ArgParse
from utils.errors import RetryExhausted, UsageError


@pytest.fixture
def out(monkeypatch):
    stream = io.StringIO()
    monkeypatch.setattr("utils.arg_parser.stdout", stream)
    return stream


def run(settings, logger, *args) -> int:
    return dispatch(ArgParse(["maxmin-alloc", *args]), settings, logger)


def read(path):
    with open(path) as f:
        return json.load(f)


def test_gen_solve_verify(tmp_path, settings, logger, out):
    inst = str(tmp_path / "inst.json")
    alloc = str(tmp_path / "alloc.json")
    assert run(settings, logger, "gen", "random", "--m", "2", "--n", "5", "--seed", "3", "-o", inst) == 0
    assert read(inst)["kind"] == "instance"

    assert run(settings, logger, "solve", inst, "--mode", "brute", "-o", alloc) == 0
    doc = read(alloc)
    assert doc["kind"] == "allocation"
    assert doc["report"]["mode"] == "brute"
    assert doc["report"]["status"] == "feasible"

    assert run(settings, logger, "verify", inst, alloc) == 0
    assert out.getvalue().startswith("PASS value=")

    doc["value"] = "12345/7"
    with open(alloc, "w") as f:
        json.dump(doc, f)
    assert run(settings, logger, "verify", inst, alloc) == 1
    assert "FAIL claimed value" in out.getvalue()


def test_auto_mode_balances_restricted(tmp_path, settings, logger, out):
    inst = str(tmp_path / "inst.json")
    alloc = str(tmp_path / "alloc.json")
    assert run(settings, logger, "gen", "random", "--m", "3", "--n", "6", "-o", inst, "--restricted") == 0
    assert run(settings, logger, "solve", inst, "-o", alloc, "--oracle") == 0
    report = read(alloc)["report"]
    assert report["mode"] == "balance"
    assert "oracle" in report


def test_followup_gap_is_infeasible(tmp_path, settings, logger, out):
    gap = str(tmp_path / "gap.json")
    result = str(tmp_path / "result.json")
    trace = str(tmp_path / "trace.jsonl")
    assert run(settings, logger, "gen", "gap", "--M", "2", "-o", gap, "--followup") == 0
    assert read(gap)["kind"] == "canonical"

    code = run(settings, logger, "solve", gap, "--layers", "2", "--trace", trace, "-o", result)
    assert code == 2
    doc = read(result)
    assert doc["status"] == "infeasible"
    assert doc["certificate"]["iteration"] == 1
    assert doc["certificate"]["status"] in ("infeasible", "no columns")
    with open(trace) as f:
        records = [json.loads(line) for line in f]
    assert records[-1]["lp"] == "infeasible"


def test_bench_writes_csv(tmp_path, settings, logger, out):
    path = tmp_path / "bs.csv"
    assert run(settings, logger, "bench", "bs", "--count", "2", "-o", str(path)) == 0
    lines = path.read_text().splitlines()
    assert lines[0].startswith("suite,instance,mode")
    assert len(lines) == 3


def test_usage_errors(tmp_path, settings, logger, out):
    with pytest.raises(UsageError):
        run(settings, logger, "frobnicate")
    inst = str(tmp_path / "inst.json")
    run(settings, logger, "gen", "random", "-o", inst)
    with pytest.raises(UsageError):
        run(settings, logger, "solve", inst, "--mode", "magic")
    with pytest.raises(UsageError):
        run(settings, logger, "gen", "spiral")
    with pytest.raises(UsageError):
        run(settings, logger, "solve", inst, "--seed", "many")


def test_bench_stops_on_solver_error(tmp_path, settings, logger, out, monkeypatch):
    def flaky(settings, count, logging):
        yield "first", "fake", Fraction(1), Fraction(1)
        raise RetryExhausted("rounding rejected 32 seeds from 0")

    monkeypatch.setitem(SUITES, "flaky", flaky)
    path = tmp_path / "flaky.csv"
    with pytest.raises(RetryExhausted):
        run(settings, logger, "bench", "flaky", "-o", str(path))
    assert out.getvalue() == ""
    assert not path.exists()


def test_layered_mode_records_matching_fallback(tmp_path, settings, logger, out):
    inst = str(tmp_path / "inst.json")
    run(settings, logger, "gen", "random", "--m", "2", "--n", "5", "--seed", "3", "-o", inst)
    # n^eps = 5 exceeds 2n / (2 ceil(log2 n)), so no guess has a positive scale
    for extra in ([], ["--M", "1"]):
        alloc = str(tmp_path / f"alloc{len(extra)}.json")
        args = ["solve", inst, "--mode", "layered", "--epsilon", "1", "--layers", "1", *extra]
        assert run(settings, logger, *args, "-o", alloc) == 0
        report = read(alloc)["report"]
        assert report["parameters"]["path"] == "matching"
        assert report["status"] == "feasible"
