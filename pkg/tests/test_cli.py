import json
import math
import subprocess
import sys

import jsonschema
import pytest

from ionroute.cli import ManifestError, RunManifest, main
from ionroute.report import (
    COMPILE_REPORT_SCHEMA,
    SWEEP_AGGREGATE_SCHEMA,
    SWEEP_ROW_SCHEMA,
    cell,
    mean_sd,
)

PINGPONG = "qubits 5\nms q[1], q[2]\nms q[2], q[3]\nms q[1], q[2]\nms q[2], q[4]\n"
TWO_TRAP = "[topology]\ntraps = 2\nedges = linear\ntotal_capacity = 4\ncommunication_capacity = 1\n"
BASELINE_FLAGS = ["--policy", "baseline", "--reorder", "off", "--rebalance", "trap0", "--ion-select", "first"]


@pytest.fixture
def files(tmp_path):
    (tmp_path / "pingpong.circ").write_text(PINGPONG)
    (tmp_path / "two_trap.cfg").write_text(TWO_TRAP)
    (tmp_path / "empty.circ").write_text("qubits 2\n")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def pingpong_args(files):
    return [files / "pingpong.circ", "--machine", files / "two_trap.cfg", "--placement", "0,1/2,3,4"]


def test_compile_pingpong_baseline(files, capsys):
    code, out, _ = run(capsys, "compile", *pingpong_args(files), *BASELINE_FLAGS)
    assert code == 0 and out.startswith("shuttles: 4 ")


def test_compile_pingpong_futureops(files, capsys):
    js, tr = files / "r.json", files / "t.txt"
    code, out, _ = run(capsys, "compile", *pingpong_args(files), "--policy", "futureops", "--json", js, "--trace", tr)
    assert code == 0 and out.startswith("shuttles: 1 ")
    report = json.loads(js.read_text())
    jsonschema.validate(report, COMPILE_REPORT_SCHEMA)
    assert report["shuttles"] == 1 and report["config"]["direction_policy"] == "futureops"
    lines = tr.read_text().splitlines()
    assert sum(" MOVE " in f" {l} " for l in lines) == 1
    assert sum(" GATE " in f" {l} " for l in lines) == 4


def test_compile_empty(files, capsys):
    js = files / "e.json"
    code, out, _ = run(capsys, "compile", files / "empty.circ", "--machine", files / "two_trap.cfg", "--json", js)
    assert code == 0 and "shuttles: 0 " in out and "fidelity: 1 " in out
    assert json.loads(js.read_text())["fidelity"] == 1.0


def test_compile_default_machine(files, capsys):
    # default L6: fill mapping puts all five ions in T0
    code, out, _ = run(capsys, "compile", files / "pingpong.circ", "--mapping", "fill")
    assert code == 0 and out.startswith("shuttles: 0 ")


@pytest.mark.parametrize("setup, argv, expected", [
    (lambda d: (d / "bad.circ").write_text("qubits 2\nms q[0], q[5]\n"), ["compile", "bad.circ"], 1),
    (lambda d: (d / "bad.cfg").write_text("[physics]\nwarp = 9\n"),
     ["compile", "pingpong.circ", "--machine", "bad.cfg"], 1),
    (lambda d: (d / "big.circ").write_text("qubits 7\nms q[0], q[6]\n"),
     ["compile", "big.circ", "--machine", "two_trap.cfg"], 2),
    (lambda d: None, ["compile", "pingpong.circ", "--machine", "two_trap.cfg", "--placement", "0,1,2,3,4/"], 2),
    (lambda d: None, ["compile", "missing.circ"], 3),
    (lambda d: None, ["compile", "pingpong.circ", "--json", "sub"], 3),
    (lambda d: (d / "m.json").write_text("{not json"), ["sweep", "--manifest", "m.json"], 1),
    (lambda d: (d / "m.json").write_text('{"configs": {"a": "baseline"}}'), ["sweep", "--manifest", "m.json"], 1),
])
def test_exit_codes(files, capsys, setup, argv, expected):
    setup(files)
    (files / "sub").mkdir(exist_ok=True)
    argv = [str(files / a) if a.endswith((".circ", ".cfg", ".json")) or a == "sub" else a for a in argv]
    code, _, err = run(capsys, *argv)
    assert code == expected
    assert err.startswith("error:")


def test_parse_error_mentions_line(files, capsys):
    (files / "bad.circ").write_text("qubits 2\n\nms q[0], q[5]\n")
    code, _, err = run(capsys, "compile", files / "bad.circ")
    assert code == 1 and "3" in err


def test_compare_pingpong(files, capsys):
    js = files / "cmp.json"
    code, out, _ = run(capsys, "compare", *pingpong_args(files), "--json", js)
    assert code == 0 and "75.00%" in out
    head = out.splitlines()[0]
    for col in ("Benchmark", "Qubits", "2Q gates", "Δ(↓)", "%Δ", "Fid ratio"):
        assert col in head
    row = json.loads(js.read_text())["rows"][0]
    jsonschema.validate(row, SWEEP_ROW_SCHEMA)
    assert row["deltas"]["candidate"]["delta_shuttles"] == 3


def test_compare_identical_policies(files, capsys):
    code, out, _ = run(capsys, "compare", *pingpong_args(files), "--against", "baseline", *BASELINE_FLAGS)
    assert code == 0 and " 0.00% " in out


def test_compare_random_batch_shows_mean_sd(capsys):
    code, out, _ = run(capsys, "compare", "--bench", "random", "--qubits", "20", "--gates", "150",
                       "--count", "3", "--seed", "5")
    assert code == 0
    agg = out.split("\n\n")[1]
    assert "random-q20" in agg and "(" in agg


def test_compare_needs_input(capsys):
    code, _, _ = run(capsys, "compare")
    assert code == 1


def test_benchgen_round_trip(files, capsys):
    out = files / "b.circ"
    assert main(["benchgen", "--family", "alltoall", "--qubits", "4", "-o", str(out)]) == 0
    text = out.read_text()
    assert text.count("\nms ") == 6
    code, printed, _ = run(capsys, "compile", out, "--machine", files / "two_trap.cfg")
    assert code == 0


@pytest.fixture(scope="module")
def sweep_dirs(tmp_path_factory):
    base = tmp_path_factory.mktemp("sweep")
    dirs = [base / "a", base / "b"]
    for d in dirs:
        assert main(["sweep", "--sizes", "60", "65", "70", "75", "--count", "30", "--gates", "120",
                     "--omit-timing", "--out", str(d)]) == 0
    return dirs


def test_sweep_writes_120_rows(sweep_dirs):
    rows = json.loads((sweep_dirs[0] / "rows.json").read_text())
    assert len(rows) == 120
    for row in rows:
        jsonschema.validate(row, SWEEP_ROW_SCHEMA)
        assert "error" not in row
    agg = json.loads((sweep_dirs[0] / "aggregate.json").read_text())
    jsonschema.validate(agg, SWEEP_AGGREGATE_SCHEMA)
    assert set(agg["groups"]) == {"random-q60", "random-q65", "random-q70", "random-q75", "all"}
    assert agg["groups"]["all"]["circuits"] == 120
    assert (sweep_dirs[0] / "table.txt").read_text().startswith("Group")


def _mean_sd(xs):
    # textbook two-pass formulas, kept apart from the package's implementation
    n = len(xs)
    m = sum(xs) / n
    sd = math.sqrt(sum((x - m) ** 2 for x in xs) / (n - 1)) if n > 1 else 0.0
    return m, sd


def test_sweep_aggregate_recomputes(sweep_dirs):
    rows = json.loads((sweep_dirs[0] / "rows.json").read_text())
    agg = json.loads((sweep_dirs[0] / "aggregate.json").read_text())
    groups = {}
    for r in rows:
        groups.setdefault(r["group"], []).append(r)
    groups["all"] = rows
    for name, members in groups.items():
        g = agg["groups"][name]
        for label in ("baseline", "optimized"):
            for key, src in (("shuttles", "shuttles"), ("fidelity", "fidelity")):
                m, sd = _mean_sd([r["results"][label][src] for r in members])
                assert abs(g[key][label]["mean"] - m) <= 1e-9 * max(1, abs(m))
                assert abs(g[key][label]["sd"] - sd) <= 1e-9 * max(1, abs(sd))
        m, sd = _mean_sd([r["deltas"]["optimized"]["pct_delta"] for r in members])
        assert abs(g["pct_delta"]["optimized"]["mean"] - m) <= 1e-9
        assert abs(g["pct_delta"]["optimized"]["sd"] - sd) <= 1e-9


def test_sweep_is_byte_identical(sweep_dirs):
    a, b = sweep_dirs
    for name in ("rows.json", "aggregate.json", "table.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sweep_single_circuit_manifest(files, capsys):
    manifest = {"inputs": ["pingpong.circ"], "machine": "two_trap.cfg", "output_dir": "out",
                "configs": {"baseline": "baseline", "optimized": "optimized"}}
    (files / "m.json").write_text(json.dumps(manifest))
    code, out, _ = run(capsys, "sweep", "--manifest", files / "m.json", "--out", files / "out")
    assert code == 0
    rows = json.loads((files / "out" / "rows.json").read_text())
    assert len(rows) == 1 and rows[0]["benchmark"] == "pingpong"
    agg = json.loads((files / "out" / "aggregate.json").read_text())
    assert agg["groups"]["pingpong"]["shuttles"]["baseline"]["sd"] == 0.0


def test_sweep_reports_partial_failure(files, capsys):
    (files / "bad.circ").write_text("qubits 2\nms q[0], q[9]\n")
    manifest = {"inputs": ["pingpong.circ", "bad.circ"], "machine": "two_trap.cfg"}
    (files / "m.json").write_text(json.dumps(manifest))
    code, _, err = run(capsys, "sweep", "--manifest", files / "m.json", "--out", files / "out")
    assert code == 4
    rows = json.loads((files / "out" / "rows.json").read_text())
    assert [("error" in r) for r in rows] == [False, True]


def test_manifest_validation():
    with pytest.raises(ManifestError):
        RunManifest.from_dict({"configs": {"a": "baseline"}})
    with pytest.raises(ManifestError):
        RunManifest.from_dict({"inputs": ["x"], "configs": {"a": {"warp": 1}}})
    m = RunManifest.from_dict({"bench": [{"family": "random", "sizes": [10, 12], "count": 2,
                                          "num_2q_gates": 5}]})
    assert [(b.num_qubits, b.seed) for b in m.bench] == [(10, 0), (10, 1), (12, 0), (12, 1)]
    assert list(m.configs) == ["baseline", "optimized"]


def test_cell_format():
    assert cell(mean_sd([500, 1050])) == "775 (389)"
    assert cell(mean_sd([3.0])) == "3"
    assert cell(None) == "-"


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "ionroute", "compile", *map(str, pingpong_args(files))],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("shuttles: 1 ")
