import json
import math

import numpy as np
import pytest

from angmf import mapio, metrics
from angmf.cli import main
from angmf.distributions import expected_angular_error
from angmf.mapio import KappaMap, NormalMap
from angmf.refine import load_weights

E_ALPHA_K1 = 1.1301368068173820266


def tilted(deg):
    t = math.radians(deg)
    return [math.sin(t), 0.0, math.cos(t)]


def write_pair(tmp_path, angles_deg, shape):
    """Pred tilted by the given angles against an all +z gt."""
    pred = np.array([tilted(a) for a in angles_deg]).reshape(shape + (3,))
    gt = np.zeros(shape + (3,))
    gt[..., 2] = 1.0
    p_pred, p_gt = str(tmp_path / "pred.snmp"), str(tmp_path / "gt.snmp")
    mapio.write_normal_map(NormalMap.from_vectors(pred), p_pred)
    mapio.write_normal_map(NormalMap.from_vectors(gt), p_gt)
    return p_pred, p_gt


# ------------------------------------------------------------------- eval


def test_eval_identical_maps(tmp_path, capsys):
    path = str(tmp_path / "m.snmp")
    data = np.zeros((3, 3, 3))
    data[..., 2] = 1.0
    mapio.write_normal_map(NormalMap.from_vectors(data), path)
    assert main(["eval", "--pred", path, "--gt", path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["mean"] == 0.0 and report["median"] == 0.0 and report["rmse"] == 0.0
    for key in ("pct_5", "pct_7_5", "pct_11_25", "pct_22_5", "pct_30"):
        assert report[key] == 100.0


def test_eval_crafted_four_pixels(tmp_path):
    # the 30 degree error is nudged up so float32 storage cannot flip it
    # across the strict pct_30 threshold
    pred, gt = write_pair(tmp_path, [10.0, 20.0, 30.0001, 40.0], (2, 2))
    out = str(tmp_path / "r.json")
    assert main(["eval", "--pred", pred, "--gt", gt, "--out-json", out]) == 0
    report = json.loads(open(out).read())
    assert report["mean"] == pytest.approx(25.0, abs=1e-3)
    assert report["median"] == pytest.approx(25.0, abs=1e-3)
    assert report["rmse"] == pytest.approx(math.sqrt(750.0), abs=1e-3)
    assert report["pct_5"] == 0.0
    assert report["pct_7_5"] == 0.0
    assert report["pct_11_25"] == 25.0
    assert report["pct_22_5"] == 50.0
    assert report["pct_30"] == 50.0
    # round-tripping the stored maps through the library gives the same JSON
    rt = metrics.summarize(
        metrics.valid_errors(
            metrics.angular_errors(mapio.read_normal_map(pred), mapio.read_normal_map(gt))
        )
    ).to_json_dict()
    assert report == rt


def test_eval_missing_file_is_usage_error(tmp_path):
    path = str(tmp_path / "x.snmp")
    data = np.zeros((1, 1, 3))
    data[..., 2] = 1.0
    mapio.write_normal_map(NormalMap.from_vectors(data), path)
    with pytest.raises(SystemExit) as ei:
        main(["eval", "--pred", str(tmp_path / "nope.snmp"), "--gt", path])
    assert ei.value.code == 2


def test_eval_bad_magic_is_io_error(tmp_path, capsys):
    bad = tmp_path / "bad.snmp"
    bad.write_bytes(b"XXXXX" + bytes(20))
    assert main(["eval", "--pred", str(bad), "--gt", str(bad)]) == 3
    assert "error:" in capsys.readouterr().err


# --------------------------------------------------------------- sparsify


def make_sparsify_inputs(tmp_path, kappas):
    angles = [5.0, 12.0, 20.0, 28.0, 36.0, 44.0]
    pred, gt = write_pair(tmp_path, angles, (2, 3))
    kpath = str(tmp_path / "k.skmp")
    kmap = KappaMap(np.array(kappas, dtype=float).reshape(2, 3))
    mapio.write_kappa_map(kmap, kpath)
    return pred, gt, kpath


def test_sparsify_perfect_ranking_gives_zero_ause(tmp_path):
    # uncertainty ranking matches the true error ranking exactly
    pred, gt, kpath = make_sparsify_inputs(tmp_path, [60.0, 50.0, 40.0, 30.0, 20.0, 10.0])
    out_json = str(tmp_path / "s.json")
    out_csv = str(tmp_path / "curve.csv")
    rc = main([
        "sparsify", "--pred", pred, "--gt", gt, "--kappa", kpath,
        "--out-csv", out_csv, "--out-json", out_json,
    ])
    assert rc == 0
    payload = json.loads(open(out_json).read())
    assert payload["metric"] == "mean"
    assert payload["ause"] == 0.0
    assert payload["ausc_estimated"] == payload["ausc_oracle"]
    est_lines = open(out_csv).read().splitlines()
    orc_lines = open(str(tmp_path / "curve.oracle.csv")).read().splitlines()
    assert est_lines[0] == "x_percent,value" and len(est_lines) == 101
    assert est_lines[1:] == orc_lines[1:]


def test_sparsify_constant_kappa(tmp_path):
    pred, gt, kpath = make_sparsify_inputs(tmp_path, [7.0] * 6)
    out_json = str(tmp_path / "s.json")
    rc = main([
        "sparsify", "--pred", pred, "--gt", gt, "--kappa", kpath,
        "--metric", "rmse", "--out-json", out_json,
    ])
    assert rc == 0
    payload = json.loads(open(out_json).read())
    assert payload["ause"] >= 0.0
    assert payload["ausc_estimated"] >= payload["ausc_oracle"]


def test_sparsify_mismatched_kappa_map(tmp_path, capsys):
    pred, gt = write_pair(tmp_path, [1.0, 2.0, 3.0, 4.0], (2, 2))
    kpath = str(tmp_path / "k.skmp")
    mapio.write_kappa_map(KappaMap(np.ones((3, 3))), kpath)
    assert main(["sparsify", "--pred", pred, "--gt", gt, "--kappa", kpath]) == 3
    assert "error:" in capsys.readouterr().err


# ----------------------------------------------------------------- sample


@pytest.mark.parametrize("dist", ["angmf", "vonmf"])
def test_sample_same_seed_same_bytes(tmp_path, dist):
    a, b, c = (str(tmp_path / n) for n in ("a.csv", "b.csv", "c.csv"))
    argv = ["sample", "--dist", dist, "--mu", "1,1,1", "--kappa", "3", "--n", "50"]
    assert main(argv + ["--seed", "5", "--out-csv", a]) == 0
    assert main(argv + ["--seed", "5", "--out-csv", b]) == 0
    assert main(argv + ["--seed", "6", "--out-csv", c]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()
    assert open(a, "rb").read() != open(c, "rb").read()


def test_sample_huge_kappa_concentrates(tmp_path):
    out = str(tmp_path / "s.csv")
    rc = main(["sample", "--mu", "0,1,0", "--kappa", "1e6", "--n", "300",
               "--seed", "2", "--out-csv", out])
    assert rc == 0
    v = mapio.read_vectors_csv(out)
    assert v.shape == (300, 3)
    assert np.max(np.arccos(np.clip(v[:, 1], -1.0, 1.0))) < 1e-2


def test_sample_mean_angle_matches_expected_error(tmp_path):
    out = str(tmp_path / "big.csv")
    rc = main(["sample", "--dist", "angmf", "--mu", "0,0,1", "--kappa", "1",
               "--n", "100000", "--seed", "77", "--out-csv", out])
    assert rc == 0
    v = mapio.read_vectors_csv(out)
    mean_angle = float(np.mean(np.arccos(np.clip(v[:, 2], -1.0, 1.0))))
    assert abs(mean_angle - E_ALPHA_K1) < 0.01


def test_sample_bad_flags_exit_2(tmp_path):
    out = str(tmp_path / "s.csv")
    base = ["sample", "--n", "5", "--seed", "1", "--out-csv", out]
    for bad in (["--mu", "1,2", "--kappa", "1"],
                ["--mu", "a,b,c", "--kappa", "1"],
                ["--mu", "0,0,0", "--kappa", "1"],
                ["--mu", "0,0,1", "--kappa", "-1"],
                ["--mu", "0,0,1", "--kappa", "nan"]):
        with pytest.raises(SystemExit) as ei:
            main(base + bad)
        assert ei.value.code == 2


# -------------------------------------------------------------------- fit


def sample_csv(tmp_path, name, mu, kappa, n, seed):
    path = str(tmp_path / name)
    assert main(["sample", "--mu", mu, "--kappa", str(kappa), "--n", str(n),
                 "--seed", str(seed), "--out-csv", path]) == 0
    return path


def test_fit_mean_identical_samples(tmp_path, capsys):
    path = str(tmp_path / "same.csv")
    mapio.write_vectors_csv(np.tile([0.0, 0.0, 1.0], (3, 1)), path)
    assert main(["fit", "--samples-csv", path, "--estimator", "mean"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["direction"] == [0.0, 0.0, 1.0]


def test_fit_mle_recovers_kappa(tmp_path):
    path = sample_csv(tmp_path, "k5.csv", "0,0,1", 5, 2000, 9)
    out = str(tmp_path / "fit.json")
    assert main(["fit", "--samples-csv", path, "--out-json", out]) == 0
    payload = json.loads(open(out).read())
    assert payload["estimator"] == "mle"
    assert payload["converged"] is True
    assert abs(payload["kappa"] - 5.0) / 5.0 < 0.10
    assert np.arccos(np.dot(payload["direction"], [0, 0, 1])) < math.radians(2.0)


def test_fit_median_robust_to_contamination(tmp_path, capsys):
    main_part = mapio.read_vectors_csv(sample_csv(tmp_path, "a.csv", "0,0,1", 50, 160, 3))
    outliers = mapio.read_vectors_csv(sample_csv(tmp_path, "b.csv", "1,0,0.2", 50, 40, 4))
    both = str(tmp_path / "mix.csv")
    mapio.write_vectors_csv(np.vstack([main_part, outliers]), both)

    assert main(["fit", "--samples-csv", both, "--estimator", "median"]) == 0
    med = json.loads(capsys.readouterr().out)
    assert main(["fit", "--samples-csv", both, "--estimator", "mean"]) == 0
    mean = json.loads(capsys.readouterr().out)
    e_med = np.arccos(np.clip(np.dot(med["direction"], [0, 0, 1]), -1, 1))
    e_mean = np.arccos(np.clip(np.dot(mean["direction"], [0, 0, 1]), -1, 1))
    assert e_med < e_mean


def test_fit_mle_identical_samples_not_converged(tmp_path, capsys):
    path = str(tmp_path / "same.csv")
    mapio.write_vectors_csv(np.tile([0.0, 0.0, 1.0], (5, 1)), path)
    assert main(["fit", "--samples-csv", path, "--estimator", "mle"]) == 4
    payload = json.loads(capsys.readouterr().out)
    assert payload["converged"] is False


# --------------------------------------------------------- expected-error


def test_expected_error_kappa_zero_prints_90(capsys):
    assert main(["expected-error", "--kappa", "0"]) == 0
    assert capsys.readouterr().out == "90.0\n"


def test_expected_error_json(tmp_path):
    out = str(tmp_path / "e.json")
    assert main(["expected-error", "--kappa", "0", "1", "--out-json", out]) == 0
    payload = json.loads(open(out).read())
    assert payload["0.0"] == 90.0
    assert payload["1.0"] == pytest.approx(math.degrees(E_ALPHA_K1), rel=1e-12)


# ------------------------------------------------------------ select-pixels


def test_select_pixels_counts_and_determinism(tmp_path):
    kpath = str(tmp_path / "k.skmp")
    gen = np.random.default_rng(8)
    mapio.write_kappa_map(KappaMap(gen.uniform(0.5, 80.0, size=(10, 10))), kpath)
    out_a, out_b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    argv = ["select-pixels", "--kappa-map", kpath, "--rs", "0.4", "--beta", "0.7"]
    assert main(argv + ["--seed", "0", "--out-csv", out_a]) == 0
    assert main(argv + ["--seed", "0", "--out-csv", out_b]) == 0
    assert open(out_a).read() == open(out_b).read()

    lines = open(out_a).read().splitlines()
    assert lines[0] == "index,role"
    roles = [ln.split(",")[1] for ln in lines[1:]]
    assert roles.count("importance") == 28
    assert roles.count("coverage") == 12
    idx = [int(ln.split(",")[0]) for ln in lines[1:]]
    assert len(set(idx)) == 40 and all(0 <= i < 100 for i in idx)


def test_select_pixels_importance_is_top_uncertainty(tmp_path):
    kpath = str(tmp_path / "k.skmp")
    kappas = np.arange(1.0, 26.0).reshape(5, 5)
    mapio.write_kappa_map(KappaMap(kappas), kpath)
    out = str(tmp_path / "sel.csv")
    assert main(["select-pixels", "--kappa-map", kpath, "--rs", "0.4",
                 "--beta", "1.0", "--seed", "1", "--out-csv", out]) == 0
    lines = open(out).read().splitlines()[1:]
    got = sorted(int(ln.split(",")[0]) for ln in lines)
    # lowest kappa = highest expected error: flat indices 0..9
    assert got == list(range(10))


# -------------------------------------------------------- simulate-boundary


def test_simulate_boundary_median_wins(tmp_path):
    out = str(tmp_path / "sim.json")
    assert main(["simulate-boundary", "--seed", "11", "--out-json", out]) == 0
    payload = json.loads(open(out).read())
    assert payload["trials"] == 100
    assert payload["median_wins"] + payload["mean_wins"] + payload["ties"] == 100
    assert payload["median_wins"] >= 95
    assert payload["median_error_deg_avg"] < payload["mean_error_deg_avg"]


# ------------------------------------------------------------- refine-demo


def test_refine_demo_smoke(tmp_path, capsys):
    out_csv = str(tmp_path / "curve.csv")
    out_w = str(tmp_path / "w.rmlp")
    argv = ["refine-demo", "--width", "8", "--height", "8", "--planes", "1",
            "--frames", "1", "--epochs", "2", "--seed", "5",
            "--out-weights", out_w, "--out-csv", out_csv]
    assert main(argv) == 0
    assert capsys.readouterr().out.startswith("epoch 2: mean ")
    lines = open(out_csv).read().splitlines()
    assert lines[0] == "epoch,mean_deg,median_deg,rmse_deg,nll"
    assert len(lines) == 3 and lines[1].startswith("1,") and lines[2].startswith("2,")
    mlp = load_weights(out_w)
    assert len(mlp.dims) == 5 and mlp.dims[1:] == (128, 128, 128, 4)


def test_refine_demo_deterministic(tmp_path):
    outs = [str(tmp_path / f"{n}.rmlp") for n in "ab"]
    argv = ["refine-demo", "--width", "8", "--height", "8", "--planes", "1",
            "--frames", "1", "--epochs", "1", "--seed", "7", "--out-weights"]
    assert main(argv + [outs[0]]) == 0
    assert main(argv + [outs[1]]) == 0
    assert open(outs[0], "rb").read() == open(outs[1], "rb").read()
