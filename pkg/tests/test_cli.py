import subprocess
import sys

import numpy as np
import pytest

from droboost import cli
from droboost.calibrate import chi2_quantile
from droboost.boost import TrainConfig, train
from droboost.core import DataError, Dataset, Ensemble, SolverError
from droboost.learners import TreeConfig, fit_projection
from droboost.metrics import classification_metrics, format_kv
from droboost.modelfile import dumps_model, load_model, loads_model, read_trace, save_model

from conftest import noisy_linear, write_generic, write_uci_like
from oracles import erm_boost

GENERIC = ["--label-column", "label", "--positive-value", "yes"]


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def parse_kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


@pytest.fixture
def toy_csv(tmp_path):
    return write_generic(tmp_path / "toy.csv", noisy_linear(200, d=4, seed=7))


class TestTrainCommand:
    def test_five_iterations(self, capsys, tmp_path, toy_csv):
        model = tmp_path / "m.txt"
        code, out, _ = run(capsys, "train", "--data", toy_csv, *GENERIC, "--delta", "0.05", "--depth", "2",
                           "--iters", "5", "--out", model)
        assert code == 0
        F, meta = load_model(model)
        assert len(F) == 5 and meta["n_features"] == 4 and meta["loss"] == "exponential"
        header, rows = read_trace(f"{model}.trace.tsv")
        assert len(rows) == 6 and header["delta"] == "0.05" and header["stop"] == "max_iters"
        assert set(rows[0]) >= {"robust_loss", "empirical_loss", "kl", "beta", "alpha"}
        assert "terms=5" in out

    def test_zero_radius_matches_plain_boosting(self, capsys, tmp_path, toy_csv):
        model = tmp_path / "m.txt"
        code, _, _ = run(capsys, "train", "--data", toy_csv, *GENERIC, "--delta", "0", "--depth", "2",
                         "--iters", "10", "--line-search", "fixed_weights", "--out", model)
        assert code == 0
        code, out, _ = run(capsys, "predict", "--data", toy_csv, *GENERIC, "--model", model)
        assert code == 0
        labels = np.array([int(line.split("\t")[1]) for line in out.splitlines()[1:]])
        data = noisy_linear(200, d=4, seed=7)
        plain = Ensemble(tuple(erm_boost(data, TreeConfig(max_depth=2), 10, fit_projection)))
        np.testing.assert_array_equal(labels, plain.predict(data.features))
        scores = np.array([float(line.split("\t")[0]) for line in out.splitlines()[1:]])
        np.testing.assert_array_equal(scores, load_model(model)[0].evaluate(data.features))

    def test_auto_radius_recorded(self, capsys, tmp_path):
        data = noisy_linear(3000, d=3, seed=11)
        path = write_generic(tmp_path / "big.csv", data)
        model = tmp_path / "m.txt"
        code, _, _ = run(capsys, "train", "--data", path, *GENERIC, "--delta", "auto", "--dim-T", "30",
                         "--confidence", "0.9", "--depth", "1", "--iters", "1", "--out", model)
        assert code == 0
        header, _ = read_trace(f"{model}.trace.tsv")
        assert float(header["delta"]) == chi2_quantile(30, 0.9) / 6000
        assert header["dim_T"] == "30" and header["N"] == "3000"

    def test_uci_schema(self, capsys, tmp_path):
        path = write_uci_like(tmp_path / "uci.csv", 120)
        code, out, _ = run(capsys, "train", "--data", path, "--schema", "uci_credit", "--skip-rows", "2",
                           "--delta", "0.01", "--depth", "2", "--iters", "3", "--out", tmp_path / "m.txt")
        assert code == 0 and "terms=3" in out

    def test_logistic_and_adaboost_radius(self, capsys, tmp_path, toy_csv):
        for extra in (["--loss", "logistic", "--delta", "0.05"], ["--delta", "adaboost"]):
            code, _, _ = run(capsys, "train", "--data", toy_csv, *GENERIC, *extra, "--depth", "1", "--iters", "3",
                             "--out", tmp_path / "m.txt")
            assert code == 0


class TestExitCodes:
    def test_bad_flag(self, capsys, toy_csv):
        with pytest.raises(SystemExit) as exc:
            cli.main(["train", "--data", str(toy_csv), "--delta", "-1", "--out", "x"])
        assert exc.value.code == 2

    def test_missing_label_column_flag(self, capsys, tmp_path, toy_csv):
        code, _, err = run(capsys, "train", "--data", toy_csv, "--out", tmp_path / "m.txt")
        assert code == 2 and "label-column" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "train", "--data", tmp_path / "nope.csv", *GENERIC, "--out", tmp_path / "m")
        assert code == 3 and "no such file" in err

    def test_bad_cell(self, capsys, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x0,label\n1,yes\nfoo,no\n", encoding="utf-8")
        code, _, err = run(capsys, "train", "--data", p, *GENERIC, "--out", tmp_path / "m")
        assert code == 3 and "row 3" in err

    def test_arity_mismatch(self, capsys, tmp_path, toy_csv):
        model = tmp_path / "m.txt"
        save_model(model, Ensemble(), n_features=7)
        code, _, err = run(capsys, "evaluate", "--data", toy_csv, *GENERIC, "--model", model)
        assert code == 3 and "7 features" in err

    def test_solver_failure(self, capsys, tmp_path, toy_csv, monkeypatch):
        def broken(data, config):
            raise SolverError("iteration 3: no bracket")
        monkeypatch.setattr(cli, "train", broken)
        code, _, err = run(capsys, "train", "--data", toy_csv, *GENERIC, "--out", tmp_path / "m.txt")
        assert code == 4 and "iteration 3" in err

    def test_console_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "droboost.cli", "--version"], capture_output=True, text=True)
        assert res.returncode == 0 and res.stdout.strip()


class TestEvaluate:
    def test_perfect_classifier(self, capsys, tmp_path):
        data = Dataset([[0.0], [1.0], [2.0], [3.0]], [-1, -1, 1, 1])
        path = write_generic(tmp_path / "sep.csv", data)
        model = tmp_path / "m.txt"
        assert run(capsys, "train", "--data", path, *GENERIC, "--delta", "0", "--depth", "1", "--iters", "3",
                   "--out", model)[0] == 0
        code, out, _ = run(capsys, "evaluate", "--data", path, *GENERIC, "--model", model, "--format", "kv")
        assert code == 0 and float(parse_kv(out)["accuracy"]) == 1.0

    def test_empty_model_predicts_positive(self, capsys, tmp_path, toy_csv):
        model = tmp_path / "m.txt"
        save_model(model, Ensemble(), n_features=4)
        code, out, _ = run(capsys, "evaluate", "--data", toy_csv, *GENERIC, "--model", model, "--format", "kv")
        kv = parse_kv(out)
        data = noisy_linear(200, d=4, seed=7)
        assert float(kv["accuracy"]) == np.mean(data.labels > 0)
        assert float(kv["false_negative_rate"]) == 1.0 and float(kv["true_positive_rate"]) == 0.0
        assert float(kv["avg_exp_loss"]) == 1.0

    def test_output_stable_and_tabled(self, capsys, tmp_path, toy_csv):
        model = tmp_path / "m.txt"
        run(capsys, "train", "--data", toy_csv, *GENERIC, "--delta", "0.05", "--depth", "2", "--iters", "4",
            "--out", model)
        outs = [run(capsys, "evaluate", "--data", toy_csv, *GENERIC, "--model", model)[1] for _ in range(2)]
        assert outs[0] == outs[1]
        assert "Average Exponential Loss" in outs[0] and "accuracy=" in outs[0]


class TestMetrics:
    def test_handmade_confusion(self):
        scores = np.array([0.7, -0.2, 0.0, -1.5])
        labels = np.array([1.0, 1.0, -1.0, -1.0])
        m = classification_metrics(scores, labels)
        # predictions +1, -1, +1, -1: one hit per class
        assert m["accuracy"] == 0.5
        assert m["false_negative_rate"] == 0.5  # P(pred=1 | true=1)
        assert m["true_positive_rate"] == 0.5  # P(pred=-1 | true=-1)
        assert m["avg_exp_loss"] == pytest.approx(np.mean(np.exp([-0.7, 0.2, 0.0, -1.5])))

    def test_missing_class_gives_nan(self):
        m = classification_metrics([1.0, 2.0], [1.0, 1.0])
        assert np.isnan(m["true_positive_rate"])
        assert "true_positive_rate=nan" in format_kv(m)


class TestModelFile:
    def test_round_trip_bit_exact(self, toy200):
        F, _ = train(toy200, TrainConfig(delta=0.05, tree=TreeConfig(max_depth=3), max_iters=6))
        G, meta = loads_model(dumps_model(F, toy200.d, delta=0.05))
        X = np.random.default_rng(1).normal(size=(1000, 4))
        np.testing.assert_array_equal(F.evaluate(X), G.evaluate(X))
        assert [f == g for f, g in zip(F.learners, G.learners)] == [True] * len(F)
        assert meta["delta"] == "0.05"

    @pytest.mark.parametrize("text", ["", "droboost-model 2\n", "droboost-model 1\nn_features 2\nloss exponential\n"
                                      "delta 0\nterms 1\nterm 1.0 3\n0 0.5 0.0\n-1 0.0 1.0\n"])
    def test_malformed(self, text):
        with pytest.raises(DataError):
            loads_model(text)


class TestCalibrateCommand:
    def test_from_n(self, capsys):
        code, out, _ = run(capsys, "calibrate-delta", "--n", "3000", "--dim-T", "30")
        kv = parse_kv(out)
        assert code == 0 and float(kv["delta"]) == chi2_quantile(30, 0.9) / 6000

    def test_with_model_diagnostic(self, capsys, tmp_path, toy_csv):
        model = tmp_path / "m.txt"
        run(capsys, "train", "--data", toy_csv, *GENERIC, "--delta", "0.05", "--depth", "2", "--iters", "4",
            "--out", model)
        code, out, _ = run(capsys, "calibrate-delta", "--data", toy_csv, *GENERIC, "--model", model)
        kv = parse_kv(out)
        assert code == 0 and kv["N"] == "200"
        assert int(kv["basis_dim"]) <= 4 and float(kv["epl"]) >= 0.0

    def test_needs_size(self, capsys):
        assert run(capsys, "calibrate-delta")[0] == 2


class TestBenchmark:
    @pytest.fixture
    def csv500(self, tmp_path):
        return write_generic(tmp_path / "b.csv", noisy_linear(500, d=3, seed=21))

    def test_table_shape(self, capsys, csv500):
        code, out, _ = run(capsys, "benchmark", "--data", csv500, *GENERIC, "--reps", "2", "--train-size", "300",
                           "--depth", "2", "--iters", "5", "--delta", "0.05")
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("# reps=2")
        assert "AdaBoost (train)" in lines[1] and "DRO-Boosting (test)" in lines[1]
        body = lines[2:6]
        assert len(body) == 4
        assert all(line.count("+-") == 4 for line in body)

    def test_zero_radius_equals_gradient_boosting(self, capsys, csv500):
        code, out, _ = run(capsys, "benchmark", "--data", csv500, *GENERIC, "--reps", "2", "--train-size", "300",
                           "--depth", "2", "--iters", "5", "--delta", "0", "--baseline", "erm", "--per-rep")
        assert code == 0
        reps = [line for line in out.splitlines() if line.startswith("rep=")]
        assert len(reps) == 8
        rows = {}
        for line in reps:
            rep, algo, part, *vals = line.split()
            rows[(rep, part, algo)] = vals
        for rep, part, algo in rows:
            assert rows[(rep, part, "algo=dro")] == rows[(rep, part, "algo=baseline")]

    def test_threads_do_not_change_output(self, capsys, csv500, monkeypatch):
        args = ["benchmark", "--data", csv500, *GENERIC, "--reps", "3", "--train-size", "300", "--depth", "2",
                "--iters", "3", "--delta", "0.05", "--per-rep"]
        one = run(capsys, *args, "--threads", "1")[1]
        monkeypatch.setenv("DROBOOST_THREADS", "3")
        assert run(capsys, *args)[1] == one
