import csv
import json

import numpy as np
import pytest

from mixer.cli import (
    CSV_HEADER,
    EXIT_INPUT,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    affinity_document,
    load_affinity_file,
    main,
)
from mixer.core import ViewPartition, validate_affinity
from mixer.evaluation import SyntheticSpec, generate_instance


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def cars_doc():
    lab = np.array([0, 1, 2, 0, 1, 0])
    return {"views": [3, 2, 1], "affinity": (lab[:, None] == lab[None, :]).astype(float).tolist(),
            "labels": lab.tolist()}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- documents

def test_affinity_round_trip_is_exact(tmp_path):
    S, labels = generate_instance(SyntheticSpec(6, 4, 0.7, 0.3, rng_seed=2))
    path = write(tmp_path / "a.json", affinity_document(S, labels))
    S2, labels2 = load_affinity_file(path)
    assert S2.partition == S.partition
    assert np.array_equal(S2.values, S.values) and np.array_equal(labels2, labels)


def test_result_round_trip(tmp_path, capsys):
    src = write(tmp_path / "in.json", cars_doc())
    out = tmp_path / "out.json"
    assert main(["solve", src, "--output", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert set(doc) == {"labels", "universe_estimate", "report", "config"}
    again = tmp_path / "again.json"
    again.write_text(json.dumps(doc, separators=(",", ":")) + "\n")
    assert again.read_bytes() == out.read_bytes()


@pytest.mark.parametrize("doc, field", [
    ({"affinity": [[1.0]]}, "views"),
    ({"views": [1]}, "affinity"),
    ({"views": [2], "affinity": [[1.0, 0.0]]}, "affinity"),
    ({"views": [1, 1], "affinity": [[1.0, 0.3], [0.2, 1.0]]}, "affinity"),
    ({"views": [1, 1], "affinity": [[1.0, "x"], ["x", 1.0]]}, "affinity"),
    ({"views": [0], "affinity": []}, "views"),
    ({"views": [1, 1], "affinity": [[1.0, 0.3], [0.3, 1.0]], "labels": [0]}, "labels"),
    ([], "top level"),
])
def test_malformed_documents_exit_1(tmp_path, capsys, doc, field):
    path = write(tmp_path / "bad.json", doc)
    assert main(["solve", path, "--output", str(tmp_path / "o.json")]) == EXIT_INPUT
    assert field in capsys.readouterr().err


def test_asymmetry_names_the_entry(tmp_path, capsys):
    path = write(tmp_path / "bad.json", {"views": [1, 1], "affinity": [[1.0, 0.3], [0.2, 1.0]]})
    main(["solve", path, "--output", str(tmp_path / "o.json")])
    assert "(0,1)" in capsys.readouterr().err


def test_missing_and_unparsable_files(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "nope.json"), "--output", str(tmp_path / "o.json")]) == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", str(bad), "--output", str(tmp_path / "o.json")]) == EXIT_INPUT
    assert "not valid JSON" in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path):
    for argv in (["frobnicate"], ["solve"], ["synth", "--universe", "x"], []):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == EXIT_INPUT


# ---------------------------------------------------------------- solve

def test_solve_cars(tmp_path, capsys):
    src = write(tmp_path / "cars.json", cars_doc())
    out = tmp_path / "r.json"
    assert main(["solve", src, "--output", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["universe_estimate"] == 3
    assert doc["labels"] == [0, 1, 2, 0, 1, 0]
    assert doc["report"]["converged_feasible"] is True
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["f1"] == 1.0


def test_solve_overrides_echoed(tmp_path):
    src = write(tmp_path / "cars.json", cars_doc())
    out = tmp_path / "r.json"
    assert main(["solve", src, "--output", str(out), "--tol", "1e-8", "--max-outer", "30", "--seed", "4"]) == 0
    cfg = json.loads(out.read_text())["config"]
    assert cfg["inner_tol"] == 1e-8 and cfg["max_outer_iters"] == 30 and cfg["rng_seed"] == 4
    assert main(["solve", src, "--output", str(out), "--tol", "-1"]) == EXIT_INPUT


def test_solve_not_converged_exits_2(tmp_path, capsys):
    for seed in range(100):
        path = tmp_path / "s.json"
        main(["synth", "--universe", "10", "--views", "5", "--obs-prob", "0.8", "--mismatch", "0.3",
              "--seed", str(seed), "--output", str(path)])
        out = tmp_path / "r.json"
        code = main(["solve", str(path), "--output", str(out), "--max-outer", "1"])
        if code == EXIT_NOT_CONVERGED:
            doc = json.loads(out.read_text())
            assert doc["report"]["converged_feasible"] is False
            assert doc["config"]["max_outer_iters"] == 1
            assert "warning" in capsys.readouterr().err
            return
        assert code == EXIT_OK
    pytest.fail("no instance needed more than one penalty weight")


# ---------------------------------------------------------------- synth

def synth(tmp_path, name, *extra):
    path = tmp_path / name
    argv = ["synth", "--universe", "30", "--views", "10", "--obs-prob", "1.0", "--mismatch", "0.25",
            "--seed", "7", "--output", str(path), *extra]
    assert main(argv) == EXIT_OK
    return path


def test_synth_full_observability_and_determinism(tmp_path):
    a = synth(tmp_path, "a.json")
    b = synth(tmp_path, "b.json")
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["views"] == [30] * 10 and len(doc["affinity"]) == 300 and len(doc["labels"]) == 300


def test_synth_noiseless_round_trip(tmp_path, capsys):
    path = tmp_path / "clean.json"
    assert main(["synth", "--universe", "6", "--views", "4", "--obs-prob", "0.7", "--mismatch", "0",
                 "--theta", "0", "--seed", "1", "--output", str(path)]) == EXIT_OK
    capsys.readouterr()
    assert main(["solve", str(path), "--output", str(tmp_path / "r.json")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["f1"] == 1.0


@pytest.mark.parametrize("flag, value", [("--obs-prob", "1.5"), ("--views", "1"), ("--universe", "0"),
                                         ("--mismatch", "-0.1"), ("--theta", "2")])
def test_synth_rejects_bad_flags(tmp_path, flag, value):
    argv = {"--universe": "3", "--views": "2", "--obs-prob": "0.5", "--mismatch": "0.1"}
    argv[flag] = value
    flat = ["synth", "--output", str(tmp_path / "x.json")] + [x for kv in argv.items() for x in kv]
    assert main(flat) == EXIT_INPUT


# ---------------------------------------------------------------- eval

def test_eval(tmp_path, capsys):
    a = write(tmp_path / "a.json", {"labels": [0, 0, 1, 1]})
    b = write(tmp_path / "b.json", {"labels": [0, 1, 0, 1]})
    c = write(tmp_path / "c.json", {"labels": [0, 1, 2]})
    assert main(["eval", a, a]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("\n") == 1 and json.loads(out)["f1"] == 1.0
    assert main(["eval", a, b]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["f1"] == 0.0
    assert main(["eval", a, c]) == EXIT_INPUT


def test_eval_reported_rates_fixture(tmp_path, capsys):
    # 1000 true pairs, 889 predicted, 706 correct: p = 0.794, r = 0.706
    truth = [g for g in range(1000) for _ in range(2)]
    pred = list(range(2000))
    for g in range(706):
        pred[2 * g + 1] = pred[2 * g]
    # 183 wrong pairs, each joining members of two different leftover groups
    wrong = [(2 * g + r, 2 * (g + 1) + r) for r in (0, 1) for g in range(706, 999, 2)][:183]
    for i, j in wrong:
        pred[j] = pred[i]
    doc_t = write(tmp_path / "t.json", {"labels": truth})
    doc_p = write(tmp_path / "p.json", {"labels": pred})
    assert main(["eval", doc_p, doc_t]) == EXIT_OK
    m = json.loads(capsys.readouterr().out)
    assert m["num_true_pairs"] == 1000 and m["num_correct_pairs"] == 706
    assert m["precision"] == pytest.approx(0.794, abs=5e-4) and m["recall"] == 0.706
    assert m["f1"] == pytest.approx(0.747, abs=0.002)


# ---------------------------------------------------------------- bench

def bench(tmp_path, name, *grid, trials="1", seed="0"):
    path = tmp_path / name
    argv = ["bench", *grid, "--trials", trials, "--seed", seed, "--output", str(path)]
    assert main(argv) == EXIT_OK
    return path


def test_bench_one_cell(tmp_path):
    path = bench(tmp_path, "b.csv", "--universe", "3", "--views", "3", "--obs-prob", "0.7", "--mismatch", "0.2")
    rows = read_csv(path)
    assert path.read_text().splitlines()[0] == "k,n,obs_prob,mismatch,algorithm,precision,recall,f1,gap,wall_ms"
    assert rows[0] == CSV_HEADER and len(rows) == 3
    assert [r[4] for r in rows[1:]] == ["mixer", "baseline"]


def test_bench_gap_empty_when_large(tmp_path):
    rows = read_csv(bench(tmp_path, "b.csv", "--universe", "20", "--views", "2", "--obs-prob", "1",
                          "--mismatch", "0.1"))
    assert all(r[8] == "" for r in rows[1:])


def test_bench_deterministic(tmp_path):
    grid = ("--universe", "4", "6", "--views", "3", "--obs-prob", "0.8", "--mismatch", "0.1", "0.3")
    a = read_csv(bench(tmp_path, "a.csv", *grid, trials="2"))
    b = read_csv(bench(tmp_path, "b.csv", *grid, trials="2"))
    assert len(a) == 1 + 4 * 2
    # all but wall time, which is a measurement
    assert [r[:9] for r in a] == [r[:9] for r in b]


def test_bench_error_rows(tmp_path):
    path = tmp_path / "e.csv"
    assert main(["bench", "--universe", "10", "--views", "5", "--obs-prob", "0.8", "--mismatch", "0.3",
                 "--trials", "10", "--max-outer", "1", "--output", str(path)]) == EXIT_OK
    algs = [r[4] for r in read_csv(path)[1:]]
    errs = [a for a in algs if a.startswith("mixer:")]
    assert errs and all(a.split(":")[1] == "NotConverged" for a in errs)


def test_bench_wall_time_grows_with_views(tmp_path):
    rows = read_csv(bench(tmp_path, "t.csv", "--universe", "40", "--views", "2", "4", "8", "16",
                          "--obs-prob", "1", "--mismatch", "0.25", trials="2"))
    wall = [float(r[9]) for r in rows[1:] if r[4] == "mixer"]
    assert all(b > a for a, b in zip(wall, wall[1:]))


def test_bench_rejects_bad_grid(tmp_path):
    assert main(["bench", "--universe", "3", "--views", "1", "--obs-prob", "0.5", "--mismatch", "0",
                 "--output", str(tmp_path / "x.csv")]) == EXIT_INPUT
    assert main(["bench", "--universe", "3", "--views", "2", "--obs-prob", "0.5", "--mismatch", "0",
                 "--trials", "0", "--output", str(tmp_path / "x.csv")]) == EXIT_INPUT


# ---------------------------------------------------------------- combine

def test_combine(tmp_path):
    p = ViewPartition((1, 1))
    docs = []
    for i, s in enumerate((1.0, 0.0, 0.5)):
        S = validate_affinity([[1.0, s], [s, 1.0]], p)
        docs.append(write(tmp_path / f"in{i}.json", affinity_document(S, [0, 0])))
    out = tmp_path / "c.json"
    assert main(["combine", *docs, "--weights", "1", "0.5", "1", "--output", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["affinity"][0][1] == pytest.approx(0.6, abs=1e-15) and doc["labels"] == [0, 0]

    assert main(["combine", docs[0], "--weights", "1", "--output", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["affinity"] == json.loads(open(docs[0]).read())["affinity"]


def test_combine_drops_disagreeing_labels(tmp_path):
    p = ViewPartition((1, 1))
    S = validate_affinity([[1.0, 0.2], [0.2, 1.0]], p)
    a = write(tmp_path / "a.json", affinity_document(S, [0, 0]))
    b = write(tmp_path / "b.json", affinity_document(S, [0, 1]))
    out = tmp_path / "c.json"
    assert main(["combine", a, b, "--weights", "1", "1", "--output", str(out)]) == EXIT_OK
    assert "labels" not in json.loads(out.read_text())


def test_combine_errors(tmp_path, capsys):
    a = write(tmp_path / "a.json", {"views": [1, 1], "affinity": [[1, 0.2], [0.2, 1]]})
    b = write(tmp_path / "b.json", {"views": [2], "affinity": [[1, 0], [0, 1]]})
    out = str(tmp_path / "c.json")
    assert main(["combine", a, b, "--weights", "1", "1", "--output", out]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert "a.json" in err and "b.json" in err
    assert main(["combine", a, "--weights", "1", "1", "--output", out]) == EXIT_INPUT
    assert main(["combine", a, "--weights", "-1", "--output", out]) == EXIT_INPUT
