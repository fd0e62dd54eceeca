import csv
import io
import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from nnreach.cli import main
from nnreach.geometry import estimate_from_dict
from nnreach.harness import CompareSpec, parse_box, run_compare
from nnreach.network import Box, random_network, save_network, truth_samples
from nnreach.partition import AnalyzerConfig, analyze
from nnreach.plots import render_svg, render_tradeoff
from nnreach.report import Report, atomic_path, build_report

DATA = Path(__file__).parent / "data"


def gids(svg_path, prefix):
    root = ET.parse(svg_path).getroot()
    return [el.get("id") for el in root.iter() if (el.get("id") or "").startswith(prefix)]


def strip_volatile(report: dict) -> dict:
    return {k: v for k, v in report.items() if k not in ("wall_time_ms", "version")}


def assert_nested_close(a, b, path="$"):
    if isinstance(a, dict):
        assert isinstance(b, dict) and sorted(a) == sorted(b), path
        for k in a:
            assert_nested_close(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert isinstance(b, list) and len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            assert_nested_close(x, y, f"{path}[{i}]")
    elif isinstance(a, float) and isinstance(b, (int, float)):
        assert math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12), path
    else:
        assert a == b, path


class TestParseBox:
    def test_two_dims(self):
        assert parse_box("0,1;-2,3") == Box([0, -2], [1, 3])

    @pytest.mark.parametrize("bad", ["", "0,1;2", "a,b", "1,0"])
    def test_bad(self, bad):
        with pytest.raises(ValueError):
            parse_box(bad)


class TestReport:
    def test_json_roundtrip(self, net42, unit_square):
        c = AnalyzerConfig(partitioner="gsg", shape="convex-hull", budget_calls=51)
        result = analyze(net42, unit_square, c)
        truth = truth_samples(net42, unit_square, 2000, 3)
        report = build_report(c, unit_square, result, truth)
        back = Report.from_json(report.to_json())
        assert back == report
        assert back.to_json() == report.to_json()
        est = estimate_from_dict(back.estimate)
        np.testing.assert_array_equal(est.polygon.vertices, result.estimate.polygon.vertices)

    def test_undefined_error(self, tmp_path):
        # constant net: zero true area
        net = random_network([2, 3, 2], "relu", 0)
        zero = type(net)(tuple(type(l)(np.zeros_like(l.weights), l.bias, l.activation) for l in net.layers))
        box = Box([0, 0], [1, 1])
        c = AnalyzerConfig(partitioner="none")
        report = build_report(c, box, analyze(zero, box, c), truth_samples(zero, box, 100, 0))
        assert report.error is None and report.error_status == "undefined"

    def test_atomic_path_cleans_up(self, tmp_path):
        target = tmp_path / "out.txt"
        with pytest.raises(RuntimeError):
            with atomic_path(target) as tmp:
                Path(tmp).write_text("partial")
                raise RuntimeError("boom")
        assert list(tmp_path.iterdir()) == []


class TestAnalyzeCommand:
    def test_identity_single_call(self, identity_net_file, tmp_path):
        out = tmp_path / "r.json"
        code = main(["analyze", "--net", str(identity_net_file), "--input-box", "0,1;0,1", "--propagator", "ibp",
                     "--partitioner", "none", "--shape", "linf-ball", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["partitions"] == 1 and report["propagator_calls"] == 1
        assert report["estimate"]["box"] == [[0.0, 1.0], [0.0, 1.0]]

    def test_deterministic(self, tmp_path):
        net = tmp_path / "net.json"
        save_network(random_network([2, 50, 2], "relu", 42), net)
        texts = []
        for i in range(2):
            out = tmp_path / f"r{i}.json"
            args = ["analyze", "--net", str(net), "--input-box", "0,1;0,1", "--partitioner", "gsg",
                    "--shape", "convex-hull", "--budget-calls", "500", "--seed", "42", "--out", str(out)]
            assert main(args) == 0
            texts.append(strip_volatile(json.loads(out.read_text())))
        assert json.dumps(texts[0], sort_keys=True) == json.dumps(texts[1], sort_keys=True)

    def test_golden(self, tmp_path, monkeypatch):
        monkeypatch.chdir(DATA)
        out = tmp_path / "r.json"
        assert main(["analyze", "--net", "small_net.json", "--input-box", "0,1;0,1", "--propagator", "crown",
                     "--partitioner", "gsg", "--shape", "convex-hull", "--budget-calls", "41", "--seed", "7",
                     "--truth-samples", "2000", "--out", str(out)]) == 0
        got = strip_volatile(json.loads(out.read_text()))
        want = strip_volatile(json.loads((DATA / "golden_report.json").read_text()))
        assert_nested_close(got, want)

    def test_agsg_three_inputs(self, tmp_path, capsys):
        net = tmp_path / "net3.json"
        save_network(random_network([3, 4, 2], "relu", 0), net)
        out = tmp_path / "r.json"
        code = main(["analyze", "--net", str(net), "--input-box", "0,1;0,1;0,1", "--partitioner", "agsg",
                     "--out", str(out)])
        assert code == 3
        assert "2 input dimensions" in capsys.readouterr().err
        assert not out.exists()

    @pytest.mark.parametrize("extra", [
        ["--input-box", "0,1"],
        ["--input-box", "nonsense"],
        ["--input-box", "0,1;0,1", "--propagator", "sdp"],
        ["--input-box", "0,1;0,1", "--samples", "0"],
        ["--input-box", "0,1;0,1", "--seed", "-1"],
    ])
    def test_usage_errors(self, identity_net_file, tmp_path, extra):
        out = tmp_path / "r.json"
        code = main(["analyze", "--net", str(identity_net_file), "--out", str(out)] + extra)
        assert code in (2, 3)
        if extra[1] != "0,1":
            assert code == 2
        assert not out.exists()

    def test_missing_net(self, tmp_path):
        assert main(["analyze", "--net", str(tmp_path / "nope.json"), "--input-box", "0,1;0,1",
                     "--out", str(tmp_path / "r.json")]) == 2

    def test_malformed_net(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"layers": [{"weights": [[1, 0]], "bias": [0, 0], "activation": "relu"}]}')
        assert main(["analyze", "--net", str(bad), "--input-box", "0,1;0,1",
                     "--out", str(tmp_path / "r.json")]) == 3

    def test_svg_single_cell(self, identity_net_file, tmp_path):
        svg = tmp_path / "a.svg"
        assert main(["analyze", "--net", str(identity_net_file), "--input-box", "0,1;0,1", "--partitioner", "none",
                     "--out", str(tmp_path / "r.json"), "--svg", str(svg)]) == 0
        assert len(gids(svg, "input-cell-")) == 1

    def test_svg_uniform_tiles(self, identity_net_file, tmp_path):
        svg = tmp_path / "a.svg"
        assert main(["analyze", "--net", str(identity_net_file), "--input-box", "0,1;0,1", "--partitioner",
                     "uniform", "--uniform-k", "2", "--out", str(tmp_path / "r.json"), "--svg", str(svg)]) == 0
        assert len(gids(svg, "input-cell-")) == 4
        assert len(gids(svg, "output-cell-")) == 4
        report = json.loads((tmp_path / "r.json").read_text())
        regions = [Box.from_intervals(c["region"]) for c in report["cells"]]
        assert sum(r.volume() for r in regions) == pytest.approx(1.0)


class TestRenderSvg:
    def test_deterministic_bytes(self, net42, unit_square, tmp_path):
        c = AnalyzerConfig(partitioner="gsg", shape="convex-hull", budget_calls=41)
        result = analyze(net42, unit_square, c)
        truth = truth_samples(net42, unit_square, 3000, 1)
        render_svg(result, truth, tmp_path / "a.svg")
        render_svg(result, truth, tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
        assert len(gids(tmp_path / "a.svg", "input-cell-")) == result.partitions
        assert gids(tmp_path / "a.svg", "estimate") == ["estimate"]

    def test_rejects_3d(self, tmp_path):
        net = random_network([3, 4, 2], "relu", 0)
        box = Box(np.zeros(3), np.ones(3))
        result = analyze(net, box, AnalyzerConfig(partitioner="none"))
        with pytest.raises(ValueError):
            render_svg(result, truth_samples(net, box, 100, 0), tmp_path / "x.svg")
        assert not (tmp_path / "x.svg").exists()

    def test_tradeoff_parses(self, tmp_path):
        rows = [{"propagator": "crown", "partitioner": "gsg", "budget": b, "calls": b - 1, "error": 1.0 / b}
                for b in (100, 200, 400)]
        render_tradeoff(rows, tmp_path / "t.svg")
        assert gids(tmp_path / "t.svg", "series-crown-gsg")


def write_spec(tmp_path, **overrides):
    spec = {
        "net": {"random": [2, 50, 2]},
        "input_box": [[0, 1], [0, 1]],
        "shape": "convex-hull",
        "pairs": [["ibp", "sg"], ["crown", "gsg"]],
        "seeds": list(range(10)),
        "budgets": [100],
        "samples": 300,
        "truth_samples": 2000,
    }
    spec.update(overrides)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    return path


class TestCompareCommand:
    def test_row_count_and_svg(self, tmp_path):
        out, svg = tmp_path / "c.csv", tmp_path / "c.svg"
        assert main(["compare", str(write_spec(tmp_path)), "--out", str(out), "--svg", str(svg)]) == 0
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert len(rows) == 20
        assert set(rows[0]) >= {"pair", "seed", "budget", "calls", "partitions", "error", "time_ms"}
        ET.parse(svg)

    def test_empty_pairs(self, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["compare", str(write_spec(tmp_path, pairs=[])), "--out", str(out)]) == 2
        assert not out.exists()

    def test_empty_seeds(self, tmp_path):
        assert main(["compare", str(write_spec(tmp_path, seeds=[])), "--out", str(tmp_path / "c.csv")]) == 2

    def test_net_path_relative_to_spec(self, tmp_path):
        save_network(random_network([2, 8, 2], "relu", 0), tmp_path / "n.json")
        spec = CompareSpec.from_dict(json.loads(write_spec(tmp_path, net="n.json", seeds=[0]).read_text()), tmp_path)
        assert Path(spec.net_path) == (tmp_path / "n.json").resolve()

    def test_error_decreases_with_budget(self):
        budgets = [100, 200, 400, 700, 1000]
        spec = CompareSpec.from_dict({
            "net": {"random": [2, 50, 2]}, "shape": "convex-hull", "pairs": [["ibp", "gsg"], ["crown", "gsg"]],
            "seeds": [0, 1, 2], "budgets": budgets, "samples": 500, "truth_samples": 3000,
        })
        rows = run_compare(spec)
        by = {}
        for row in rows:
            by.setdefault((row["propagator"], row["seed"]), []).append(row["error"])
        ok = total = 0
        for (prop, seed), errors in by.items():
            pairs = list(zip(errors, errors[1:]))
            if prop == "ibp":
                assert all(b <= a + 1e-12 for a, b in pairs)
            ok += sum(b <= a + 1e-12 for a, b in pairs)
            total += len(pairs)
        assert ok / total >= 0.9


class TestTheoryCommand:
    def test_passes(self, tmp_path):
        out = tmp_path / "t.json"
        assert main(["theory", "--trials", "100", "--seed", "7", "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["passed"]
        assert len(report["cases"]) == 100
        assert report["fixed_case"]["closed_form"] == pytest.approx(3.0)
        assert report["fixed_case"]["brute"] == pytest.approx(3.0)
        for case in report["cases"]:
            assert case["abs_diff"] <= max(1e-12, 1e-9 * abs(case["brute"]))
            assert set(case) >= {"V", "r", "closed_form", "brute", "abs_diff"}

    def test_zero_trials(self, tmp_path):
        assert main(["theory", "--trials", "0"]) == 2

    def test_mismatch_exit(self, monkeypatch, capsys):
        import nnreach.harness as harness

        monkeypatch.setattr(harness, "vred_closed_form", lambda V, spec: 1e6)
        assert main(["theory", "--trials", "3"]) == 1
        assert "first failure" in capsys.readouterr().err

    def test_stdout(self, capsys):
        assert main(["theory", "--trials", "2", "--dims", "2"]) == 0
        assert json.loads(capsys.readouterr().out)["trials"] == 2


def test_usage_no_command():
    assert main([]) == 2


def test_version(capsys):
    assert main(["--version"]) == 0


def test_arm_demo_command(tmp_path, capsys):
    cache, table, svg_dir = tmp_path / "arm.json", tmp_path / "arm.csv", tmp_path / "svg"
    args = ["arm-demo", "--budget-calls", "200", "--net-cache", str(cache), "--out", str(table),
            "--svg-dir", str(svg_dir)]
    assert main(args) == 0
    assert cache.exists()
    printed = capsys.readouterr().out
    assert "CROWN + AGSG" in printed and "Prop. Calls" in printed
    rows = list(csv.DictReader(io.StringIO(table.read_text())))
    assert len(rows) == 9 and all(r["sound"] == "True" for r in rows)
    for r in rows:
        if r["partitioner"] in ("sg", "gsg"):
            assert int(r["calls"]) == 2 * int(r["partitions"]) - 1
    for name in ("arm_worst.svg", "arm_best.svg"):
        ET.parse(svg_dir / name)
    # second run reuses the cached network
    assert main(args) == 0
