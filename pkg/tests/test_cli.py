import csv
import json

import numpy as np
import pytest

from fairgfe.cli import main
from fairgfe.tree_model import load_model


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synthesize", "--kind", "salary", "--rows", "1500", "--out-dir", str(d)]) == 0
    base = data_args(d)
    assert main(["train", *base, "--model", "forest", "--n-trees", "5", "--max-depth", "5",
                 "--out", str(d / "model.json")]) == 0
    return d


def data_args(d):
    return ["--data", str(d / "data.csv"), "--schema", str(d / "schema.json")]


def constrain(d, out, constraints="constraints.json", *extra):
    return main(["constrain", *data_args(d), "--model", str(d / "model.json"),
                 "--constraints", str(d / constraints), "--out", str(d / out),
                 "--report", str(d / (out + ".report.json")), *extra])


def test_constrain_closes_training_gaps(workdir):
    assert constrain(workdir, "fair.json") == 0
    rep = json.loads((workdir / "fair.json.report.json").read_text())
    assert rep["max_gap_before"] > 100
    assert rep["max_gap_after"] < 1e-6 * 1e5
    assert (workdir / "fair.json.report.txt").read_text().startswith("mode=per_tree")


def test_empty_constraint_file_keeps_leaves(workdir):
    (workdir / "empty.json").write_text('{"groups": []}')
    assert constrain(workdir, "same.json", "empty.json") == 0
    a, b = load_model(workdir / "model.json"), load_model(workdir / "same.json")
    for x, y in zip(a.trees, b.trees):
        assert x.leaf_values.tobytes() == y.leaf_values.tobytes()


def test_duplicate_constraint_gives_identical_report(workdir):
    d = json.loads((workdir / "constraints.json").read_text())
    c0 = d["constraints"][0]
    d["constraints"].append({"a": c0["b"], "b": c0["a"]})
    (workdir / "dup.json").write_text(json.dumps(d))
    assert constrain(workdir, "f1.json") == 0
    assert constrain(workdir, "f2.json", "dup.json") == 0
    assert (workdir / "f1.json").read_bytes() == (workdir / "f2.json").read_bytes()
    r1 = json.loads((workdir / "f1.json.report.json").read_text())
    r2 = json.loads((workdir / "f2.json.report.json").read_text())
    assert r1["constraints"] == r2["constraints"]


@pytest.mark.parametrize("split", ["train", "test"])
def test_evaluate_writes_metrics(workdir, split):
    constrain(workdir, "fair.json")
    out = workdir / f"eval_{split}.json"
    assert main(["evaluate", *data_args(workdir), "--original", str(workdir / "model.json"),
                 "--constrained", str(workdir / "fair.json"), "--constraints", str(workdir / "constraints.json"),
                 "--split", split, "--out", str(out)]) == 0
    m = json.loads(out.read_text())
    assert np.isfinite(m["rmse_original"]) and np.isfinite(m["rmse_constrained"])
    if split == "train":
        for g in m["constraint_gaps"]:
            assert abs(g["gap_constrained"]) < 1e-6


def test_histogram_csv_is_consistent(workdir):
    constrain(workdir, "fair.json")
    out = workdir / "hist.csv"
    assert main(["histogram", *data_args(workdir), "--original", str(workdir / "model.json"),
                 "--constrained", str(workdir / "fair.json"), "--constraints", str(workdir / "constraints.json"),
                 "--bins", "10", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    groups = {r["group"] for r in rows}
    for g in groups:
        bins = [r for r in rows if r["group"] == g and r["record"] == "bin"]
        assert len(bins) == 10
        assert sum(int(r["before"]) for r in bins) == sum(int(r["after"]) for r in bins)
        edges = [(float(r["bin_lower"]), float(r["bin_upper"])) for r in bins]
        assert all(lo < hi for lo, hi in edges)
        assert all(a[1] == b[0] for a, b in zip(edges, edges[1:]))


@pytest.mark.filterwarnings("ignore::fairgfe.errors.SmallGroupWarning")
def test_kernel_subcommand(workdir):
    out = workdir / "kernel.csv"
    assert main(["kernel", *data_args(workdir), "--constraints", str(workdir / "constraints.json"),
                 "--max-rows", "300", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "row,prediction_unconstrained,prediction_constrained"
    assert len(lines) == 1501


def test_exit_codes(workdir, tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "missing.csv"), "--schema", str(workdir / "schema.json"),
                 "--out", str(tmp_path / "m.json")]) == 3
    bad = tmp_path / "bad.csv"
    text = (workdir / "data.csv").read_text().splitlines()
    text[3] = text[3].replace(",", ",oops,", 1)
    bad.write_text("\n".join(text) + "\n")
    assert main(["train", "--data", str(bad), "--schema", str(workdir / "schema.json"),
                 "--out", str(tmp_path / "m.json")]) == 3
    assert "line" in capsys.readouterr().err
    (tmp_path / "c.json").write_text(json.dumps({
        "groups": [{"name": "nobody", "all": [{"col": "gender", "op": "equals", "value": "Z"}]},
                   {"name": "f", "all": [{"col": "gender", "op": "equals", "value": "F"}]}],
        "constraints": [{"a": "nobody", "b": "f"}]}))
    assert main(["constrain", *data_args(workdir), "--model", str(workdir / "model.json"),
                 "--constraints", str(tmp_path / "c.json"), "--out", str(tmp_path / "o.json")]) == 3
    assert main(["constrain", *data_args(workdir), "--model", str(workdir / "model.json"),
                 "--constraints", str(workdir / "constraints.json"), "--out", str(tmp_path / "o.json"),
                 "--sigma-n-sq", "-1"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["train", "--bogus"])
    assert info.value.code == 2
