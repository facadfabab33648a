"""File formats and the command-line front end."""

import os

import numpy as np
import pytest

from aggnmf import AggregationScheme, ObservationVector, Segment, apply_scheme, random_scheme
from aggnmf import cli, fileio


def test_matrix_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(7, 4)) * 1e3
    path = str(tmp_path / "m.csv")
    fileio.save_matrix(path, X)
    back = fileio.load_matrix(path)
    assert np.array_equal(back, X)  # shortest-repr decimals are lossless
    with open(path) as fh:
        assert fh.readline().strip().lstrip("# ") == "1,2,3,4"


def test_scheme_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    scheme = random_scheme(9, 3, 0.3, rng)
    path = str(tmp_path / "scheme.csv")
    fileio.save_scheme(path, scheme)
    back = fileio.load_scheme(path)
    assert back.T == scheme.T and back.N == scheme.N
    assert [(s.column, s.start, s.length) for s in back.segments] == [
        (s.column, s.start, s.length) for s in scheme.segments
    ]
    # 1-based on disk
    with open(path) as fh:
        lines = fh.read().strip().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "column,start,length"
    first = scheme.segments[0]
    assert lines[2] == f"{first.column + 1},{first.start + 1},{first.length}"


def test_scheme_load_shape_override(tmp_path):
    scheme = AggregationScheme(T=5, N=2, segments=[Segment(0, 0, 2)])
    path = str(tmp_path / "scheme.csv")
    fileio.save_scheme(path, scheme)
    bigger = fileio.load_scheme(path, T=8, N=4)
    assert bigger.T == 8 and bigger.N == 4
    # strip the self-describing comment: shape must then be given explicitly
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if not ln.startswith("#")]
    bare = str(tmp_path / "bare.csv")
    with open(bare, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        fileio.load_scheme(bare)
    again = fileio.load_scheme(bare, T=5, N=2)
    assert again.T == 5


def test_observations_roundtrip_and_validation(tmp_path):
    rng = np.random.default_rng(2)
    scheme = random_scheme(8, 2, 0.5, rng)
    b = apply_scheme(scheme, rng.random((8, 2)))
    path = str(tmp_path / "obs.csv")
    fileio.save_observations(path, b)
    back = fileio.load_observations(path, scheme)
    assert np.array_equal(back.values, b.values)
    # corrupt the segment ids
    with open(path) as fh:
        content = fh.read()
    with open(path, "w") as fh:
        fh.write(content.replace("1,", "3,", 1))
    with pytest.raises(ValueError):
        fileio.load_observations(path, scheme)


def test_rho_roundtrip(tmp_path):
    rho = np.array([0.5, -0.25, 0.99])
    path = str(tmp_path / "rho.csv")
    fileio.save_rho(path, rho)
    assert np.array_equal(fileio.load_rho(path, 3), rho)
    with pytest.raises(ValueError):
        fileio.load_rho(path, 4)


def test_manifest_roundtrip(tmp_path):
    path = str(tmp_path / "m.yaml")
    data = {"b": 2, "a": {"x": [1, 2.5, "s"], "y": None}}
    fileio.save_manifest(path, data)
    assert fileio.load_manifest(path) == data


def _run(argv):
    return cli.main(argv)


def test_simulate_writes_files_and_is_deterministic(tmp_path, capsys):
    out1 = str(tmp_path / "a")
    out2 = str(tmp_path / "b")
    args = ["simulate", "--periods", "30", "--series", "8", "--rank", "3", "--seed", "5"]
    assert _run(args + ["--out-dir", out1]) == 0
    assert _run(args + ["--out-dir", out2]) == 0
    for name in ("ground_truth.csv", "history.csv", "rho.csv"):
        with open(os.path.join(out1, name)) as f1, open(os.path.join(out2, name)) as f2:
            assert f1.read() == f2.read()
    V = fileio.load_matrix(os.path.join(out1, "ground_truth.csv"))
    assert V.shape == (30, 8)
    manifest = fileio.load_manifest(os.path.join(out1, "manifest.yaml"))
    assert manifest["spec"]["nu"] == 2.5  # defaults recorded


def test_simulate_rejects_bad_config(tmp_path):
    assert _run(["simulate", "--periods", "0", "--out-dir", str(tmp_path)]) == 2


def test_sample_full_observation_counts(tmp_path, capsys):
    out = str(tmp_path / "sim")
    _run(["simulate", "--periods", "12", "--series", "3", "--rank", "2", "--out-dir", out])
    samp = str(tmp_path / "samp")
    code = _run(
        ["sample", "--matrix", os.path.join(out, "ground_truth.csv"),
         "--scheme", "periodic", "--interval", "1", "--out-dir", samp]
    )
    assert code == 0
    msg = capsys.readouterr().out
    assert "36 segments" in msg
    assert "coverage 1.0000" in msg
    scheme = fileio.load_scheme(os.path.join(samp, "scheme.csv"))
    assert scheme.D == 36


def test_sample_random_rate_counts(tmp_path):
    out = str(tmp_path / "sim")
    _run(["simulate", "--periods", "200", "--series", "2", "--rank", "2", "--out-dir", out])
    samp = str(tmp_path / "samp")
    assert _run(
        ["sample", "--matrix", os.path.join(out, "ground_truth.csv"),
         "--scheme", "random", "--rate", "0.1", "--out-dir", samp]
    ) == 0
    scheme = fileio.load_scheme(os.path.join(samp, "scheme.csv"))
    for n in range(2):
        ids, _, _ = scheme.column_segments(n)
        assert len(ids) == 20


def test_sample_rejects_bad_rate(tmp_path):
    out = str(tmp_path / "sim")
    _run(["simulate", "--periods", "10", "--series", "2", "--rank", "2", "--out-dir", out])
    code = _run(
        ["sample", "--matrix", os.path.join(out, "ground_truth.csv"),
         "--scheme", "random", "--rate", "1.5", "--out-dir", str(tmp_path / "x")]
    )
    assert code == 2
    code = _run(
        ["sample", "--matrix", os.path.join(out, "ground_truth.csv"),
         "--scheme", "periodic", "--interval", "11", "--out-dir", str(tmp_path / "y")]
    )
    assert code == 2


def test_recover_round_trip_and_determinism(tmp_path, capsys):
    sim = str(tmp_path / "sim")
    _run(["simulate", "--periods", "20", "--series", "6", "--rank", "3", "--out-dir", sim])
    samp = str(tmp_path / "samp")
    _run(["sample", "--matrix", os.path.join(sim, "ground_truth.csv"),
          "--scheme", "periodic", "--interval", "1", "--out-dir", samp])
    rec1 = str(tmp_path / "rec1")
    rec2 = str(tmp_path / "rec2")
    base = ["recover", "--observations", os.path.join(samp, "observations.csv"),
            "--scheme", os.path.join(samp, "scheme.csv"),
            "--rank", "2", "--seed", "3",
            "--ground-truth", os.path.join(sim, "ground_truth.csv")]
    assert _run(base + ["--out-dir", rec1]) == 0
    assert _run(base + ["--out-dir", rec2]) == 0
    with open(os.path.join(rec1, "recovered.csv")) as f1, open(
        os.path.join(rec2, "recovered.csv")
    ) as f2:
        assert f1.read() == f2.read()
    manifest = fileio.load_manifest(os.path.join(rec1, "manifest.yaml"))
    assert manifest["normalized_error"] <= 1e-9
    assert manifest["stopped_by"] in ("kkt", "stall", "max_outer", "time")
    assert manifest["clipped_negative_entries"] == 0
    capsys.readouterr()
    code = _run(["evaluate", "--recovered", os.path.join(rec1, "recovered.csv"),
                 "--ground-truth", os.path.join(sim, "ground_truth.csv")])
    assert code == 0
    printed = capsys.readouterr().out
    assert float(printed.split(":")[1]) <= 1e-9


def test_recover_penalized_needs_rho(tmp_path):
    sim = str(tmp_path / "sim")
    _run(["simulate", "--periods", "20", "--series", "6", "--rank", "3", "--out-dir", sim])
    samp = str(tmp_path / "samp")
    _run(["sample", "--matrix", os.path.join(sim, "ground_truth.csv"),
          "--scheme", "periodic", "--interval", "4", "--out-dir", samp])
    args = ["recover", "--observations", os.path.join(samp, "observations.csv"),
            "--scheme", os.path.join(samp, "scheme.csv"),
            "--rank", "2", "--penalized", "--out-dir", str(tmp_path / "rec")]
    assert _run(args) == 2
    assert _run(args + ["--rho-file", os.path.join(sim, "rho.csv")]) == 0
    manifest = fileio.load_manifest(str(tmp_path / "rec" / "manifest.yaml"))
    assert manifest["penalized"] is True
    assert manifest["lambda"] > 0


def test_recover_rejects_inadmissible_weight(tmp_path):
    sim = str(tmp_path / "sim")
    _run(["simulate", "--periods", "20", "--series", "6", "--rank", "3", "--out-dir", sim])
    samp = str(tmp_path / "samp")
    _run(["sample", "--matrix", os.path.join(sim, "ground_truth.csv"),
          "--scheme", "periodic", "--interval", "4", "--out-dir", samp])
    code = _run(["recover", "--observations", os.path.join(samp, "observations.csv"),
                 "--scheme", os.path.join(samp, "scheme.csv"),
                 "--rank", "2", "--penalized",
                 "--rho-file", os.path.join(sim, "rho.csv"),
                 "--lambda", "50", "--out-dir", str(tmp_path / "rec")])
    assert code == 3  # weight above the admissible bound for the data's thresholds


def test_evaluate_errors(tmp_path):
    a = str(tmp_path / "a.csv")
    c = str(tmp_path / "c.csv")
    fileio.save_matrix(a, np.ones((3, 2)))
    fileio.save_matrix(c, np.ones((4, 2)))
    assert _run(["evaluate", "--recovered", a, "--ground-truth", c]) == 3
    assert _run(["evaluate", "--recovered", a,
                 "--ground-truth", str(tmp_path / "missing.csv")]) == 3


def test_sweep_cli_row_counts_and_interp_rows(tmp_path):
    out = str(tmp_path / "sweep")
    code = _run(["sweep", "--periods", "24", "--series", "6", "--rank", "3",
                 "--schemes", "periodic", "--intervals", "4",
                 "--methods", "unpenalized,interpolation", "--updates", "hals",
                 "--ranks", "2,3", "--repeats", "2", "--seed", "1",
                 "--out-dir", out])
    assert code == 0
    with open(os.path.join(out, "results.csv")) as fh:
        lines = fh.read().strip().splitlines()
    header = lines[0].split(",")
    assert header[:5] == ["dataset", "scheme", "rate", "method", "update"]
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    assert len(rows) == 2 * 2 + 2  # 2 ranks x 2 repeats + 2 interpolation rows
    interp = [r for r in rows if r["method"] == "interpolation"]
    assert len(interp) == 2
    assert all(r["K"] == "" for r in interp)
    assert all(r["status"] == "ok" for r in rows)
    assert os.path.exists(os.path.join(out, "aggregated.csv"))
    assert os.path.exists(os.path.join(out, "timings.csv"))
    assert os.path.exists(os.path.join(out, "manifest.yaml"))


def test_sweep_cli_rejects_unknown_method(tmp_path):
    code = _run(["sweep", "--methods", "magic", "--out-dir", str(tmp_path / "s")])
    assert code == 2


def test_csv_dataset_sweep_requires_rho_for_penalized(tmp_path):
    path = str(tmp_path / "data.csv")
    rng = np.random.default_rng(3)
    fileio.save_matrix(path, rng.random((20, 5)))
    code = _run(["sweep", "--dataset", path, "--schemes", "periodic",
                 "--intervals", "4", "--methods", "penalized", "--updates", "hals",
                 "--ranks", "2", "--repeats", "1", "--out-dir", str(tmp_path / "s")])
    assert code == 2


def test_observation_vector_length_check():
    scheme = AggregationScheme(T=4, N=1, segments=[Segment(0, 0, 2)])
    with pytest.raises(ValueError):
        ObservationVector(np.array([1.0, 2.0]), scheme)
