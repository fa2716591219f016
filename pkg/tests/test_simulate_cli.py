import csv
import json

import numpy as np
import pytest

from bvgm.cli import RunConfig, main
from bvgm.data import load_dataset
from bvgm.errors import ValidationError
from bvgm.simulate import (LinearSpec, f1, f2, generate_bsam, generate_linear, preset, selection_metrics,
                           squared_error, write_csv)
from bvgm.theory import enumerate_gamma_given_beta

from conftest import random_field


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestGenerators:
    def test_case1_large(self):
        s = preset("case1-large")
        assert (s.n, s.p, s.S, s.beta) == (50, 100, (2, 3, 5, 10), (-4.0, 2.0, -1.0, 2.5))
        X, y = generate_linear(s)
        assert X.shape == (50, 100)
        # same seed and shapes, so the noise is the pure-noise dataset's response
        noise = generate_linear(LinearSpec(50, 100, seed=0))[1]
        np.testing.assert_allclose(y - X @ s.beta_full, noise, atol=1e-12)

    def test_pure_noise(self):
        X, y = generate_linear(LinearSpec(30, 5, seed=2))
        r = np.random.Generator(np.random.PCG64(np.random.SeedSequence(2, spawn_key=(0,))))
        r.standard_normal((30, 5))
        np.testing.assert_array_equal(y, r.standard_normal(30))

    def test_model_presets(self):
        a = preset("modelIA")
        assert (a.n, a.p, len(a.S)) == (200, 1000, 32)
        assert a.beta[a.S.index(31)] == 0.8 and a.beta[a.S.index(60)] == 1.0
        b = preset("modelIIB")
        assert (b.n, b.p) == (500, 500) and set(b.beta) == {-0.8, 0.8}
        c = preset("chain")
        assert c.S == tuple(range(1, 16))
        with pytest.raises(ValidationError):
            preset("nope")
        with pytest.raises(ValidationError):
            LinearSpec(10, 5, (6,), (1.0,))

    def test_byte_identical_csv(self, tmp_path):
        for k in range(2):
            X, y = generate_linear(preset("case1-small", seed=9))
            write_csv(tmp_path / f"d{k}.csv", X, y)
        assert (tmp_path / "d0.csv").read_bytes() == (tmp_path / "d1.csv").read_bytes()
        d = load_dataset(tmp_path / "d0.csv")
        np.testing.assert_allclose(d.X.sum(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose((d.X**2).sum(axis=0), 1.0, atol=1e-10)

    def test_function_values(self):
        x = np.linspace(0, 1, 11)
        np.testing.assert_array_equal(f1(x), x)
        assert f2(0.5) == 0.0

    def test_bsam_correlation(self):
        X, y, F = generate_bsam(10_000, 5, t=1.0, seed=4)
        C = np.corrcoef(X.T)
        off = C[np.triu_indices(5, 1)]
        assert np.all(np.abs(off - 0.5) <= 0.03)
        np.testing.assert_allclose(F[:, 0], X[:, 0])

    def test_bsam_noise_level(self):
        X, y, F = generate_bsam(50_000, 4, seed=5)
        assert np.var(y - F.sum(axis=1)) == pytest.approx(1.74, rel=0.03)


class TestMetrics:
    def test_perfect(self):
        probs = np.zeros(10)
        probs[[0, 3, 5, 7]] = 0.9
        m = selection_metrics(probs, [0, 3, 5, 7])
        assert (m.fp_rate, m.fn_rate, m.ms) == (0.0, 0.0, 4)

    def test_everything(self):
        m = selection_metrics(np.ones(10), [0, 1, 2, 3])
        assert (m.fp_rate, m.fn_rate, m.ms) == (1.0, 0.0, 10)

    def test_cutoff_is_strict(self):
        assert selection_metrics([0.5, 0.51], [0]).ms == 1

    def test_squared_error(self):
        assert squared_error([1.0, 2.0], [1.0, 4.0]) == 2.0


class TestCli:
    def test_generate_and_run_replay(self, tmp_path):
        data = tmp_path / "d.csv"
        assert main(["generate-linear", "--preset", "case1-large", "--p", "12", "--out", str(data)]) == 0
        out = tmp_path / "run1"
        assert main(["run", "--data", str(data), "--b", "5", "--iters", "400", "--burn-in", "100",
                     "--algorithm", "cluster", "--comembership", "--out", str(out)]) == 0
        for name in ("state_summary.csv", "mixing.csv", "manifest.json", "comembership_aligned.csv"):
            assert (out / name).exists()
        man = json.loads((out / "manifest.json").read_text())
        assert man["config"]["algorithm"] == "cluster" and "numpy" in man["versions"]
        cfg = man["config"]
        cfg["out"] = str(tmp_path / "run2")
        (tmp_path / "replay.json").write_text(json.dumps(cfg))
        assert main(["run", "--config", str(tmp_path / "replay.json")]) == 0
        for name in ("state_summary.csv", "mixing.csv"):
            assert (out / name).read_bytes() == (tmp_path / "run2" / name).read_bytes()
        rows = read_rows(out / "state_summary.csv")
        assert [r["predictor"] for r in rows[:12]] == [str(j) for j in range(1, 13)]

    def test_manifest_itself_replays(self, tmp_path):
        data = tmp_path / "d.csv"
        main(["generate-linear", "--n", "30", "--p", "4", "--S", "1", "--beta", "2", "--out", str(data)])
        a = tmp_path / "a"
        main(["sweep", "--data", str(data), "--b-grid", "0.1,1,10", "--iters", "200", "--burn-in", "50",
              "--out", str(a)])
        man = json.loads((a / "manifest.json").read_text())
        assert man["command"] == "sweep"
        assert main(["sweep", "--config", str(a / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
        assert (a / "profile.csv").read_bytes() == (tmp_path / "b" / "profile.csv").read_bytes()
        assert len(read_rows(a / "profile.csv")) == 12

    def test_gamma_only_vs_enumeration(self, tmp_path):
        f = random_field(4, 3)
        fpath = tmp_path / "field.json"
        fpath.write_text(json.dumps({"J": f.J.tolist(), "h": f.h.tolist()}))
        out = tmp_path / "g"
        assert main(["run", "--mode", "gamma_only", "--field", str(fpath), "--iters", "100000", "--burn-in",
                     "1000", "--out", str(out)]) == 0
        rows = [r for r in read_rows(out / "state_summary.csv") if r["predictor"].isdigit()]
        probs = np.array([float(r["probability"]) for r in rows])
        exact = enumerate_gamma_given_beta(f).marginals
        se = np.sqrt(exact * (1 - exact) / 99_000)
        assert np.all(np.abs(probs - exact) <= np.maximum(3 * 2 * se, 1e-3))

    def test_theory_and_metrics(self, tmp_path, capsys):
        assert main(["theory", "--prior", "laplace", "--a", "0", "--b-grid", "1", "--method", "closed_form"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "prior,a,b,odds,probability"
        assert float(lines[1].split(",")[4]) == pytest.approx(0.396, abs=1e-3)
        summ = tmp_path / "s.csv"
        summ.write_text("predictor,name,probability,beta_cond_mean,tau_mean\n1,x1,0.9,1,1\n2,x2,0.2,0,1\n"
                        "3,x3,0.7,0,1\nphi,phi,,,\n")
        assert main(["metrics", "--summary", str(summ), "--truth", "1"]) == 0
        m = json.loads(capsys.readouterr().out)
        assert m == {"fn_rate": 0.0, "fp_rate": 0.5, "ms": 2}

    def test_bsam_run_writes_functions(self, tmp_path):
        data, truth = tmp_path / "b.csv", tmp_path / "t.csv"
        assert main(["generate-bsam", "--n", "60", "--p", "5", "--amplitudes", "5,3,4,6", "--out", str(data),
                     "--truth-out", str(truth)]) == 0
        out = tmp_path / "o"
        assert main(["run", "--mode", "bsam", "--data", str(data), "--b", "26", "--prior", "cauchy",
                     "--iters", "200", "--burn-in", "50", "--out", str(out)]) == 0
        fr = read_rows(out / "functions.csv")
        assert set(fr[0]) >= {"predictor", "x", "f_hat", "lo95", "hi95"}
        assert main(["metrics", "--summary", str(out / "state_summary.csv"), "--truth", "1,2,3,4",
                     "--functions", str(out / "functions.csv"), "--truth-functions", str(truth),
                     "--data", str(data)]) == 0

    def test_errors_exit_2(self, tmp_path, capsys):
        assert main(["run", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x")]) == 2
        assert "does not exist" in capsys.readouterr().err
        bad = tmp_path / "c.json"
        bad.write_text(json.dumps({"bogus": 1}))
        with pytest.raises(ValidationError):
            RunConfig.from_json(bad)
