import numpy as np
import pytest

from avfusion.errors import EmptyEvalSet, EmptySpace, MissingArtifacts
from avfusion.fusion import IntermediateFusionNet
from avfusion.harness import (
    BENCH_AUDIO_MEAN,
    BENCH_PRIVATE_SIGMA,
    BENCH_SHARED_COUPLING,
    BENCH_VIDEO_MEAN,
    ExperimentConfig,
    MetricsReport,
    RunStats,
    bayes_accuracies,
    compare_strategies,
    evaluate,
    load_experiment_data,
    make_synthetic_benchmark,
    random_search,
    run_experiment,
    sample_search_config,
    write_benchmark_files,
)
from avfusion.nn import Dense

from oracles import tally_accuracy


def sign_net():
    """Hand-built head: predicts violent (1) iff the first audio value > 0."""
    net = IntermediateFusionNet(1, 1, hidden=(), dropout=0.0, rng=np.random.default_rng(0), dtype=np.float64)
    dense = [l for l in net._blocks["trunk"].layers if isinstance(l, Dense)][0]
    dense.weights[...] = [[-1.0, 0.0], [1.0, 0.0]]
    dense.bias[...] = 0.0
    return net


class TestEvaluate:
    def test_52_of_54(self):
        labels = np.array([i % 2 for i in range(54)])
        audio = np.where(labels == 1, 1.0, -1.0)[:, None]
        audio[0, 0] *= -1.0  # two deliberate mistakes
        audio[1, 0] *= -1.0
        video = np.zeros((54, 1))
        res = evaluate(sign_net(), (audio, video), labels)
        assert abs(res.accuracy - 100.0 * 52 / 54) < 1e-9
        assert abs(res.accuracy - 96.2962962962963) < 1e-9
        assert res.confusion.sum() == 54

    def test_all_correct(self):
        labels = np.array([i % 2 for i in range(10)])
        audio = np.where(labels == 1, 1.0, -1.0)[:, None]
        res = evaluate(sign_net(), (audio, np.zeros((10, 1))), labels)
        assert res.accuracy == 100.0
        assert res.confusion[0, 1] == 0 and res.confusion[1, 0] == 0

    def test_alternating_matches_tally_oracle(self):
        labels = np.array([i % 2 for i in range(10)])
        audio = np.where(labels == 1, 1.0, -1.0)[:, None]
        audio[::2] *= -1.0  # every even row wrong
        res = evaluate(sign_net(), (audio, np.zeros((10, 1))), labels)
        net = sign_net()
        logits, _ = net.forward((audio, np.zeros((10, 1))), train=False)
        predicted = np.argmax(logits, axis=1)
        oracle_acc, oracle_conf = tally_accuracy(labels.tolist(), predicted.tolist())
        assert res.accuracy == oracle_acc == 50.0
        assert np.array_equal(res.confusion, oracle_conf)

    def test_empty_set_rejected(self):
        with pytest.raises(EmptyEvalSet):
            evaluate(sign_net(), (np.zeros((0, 1)), np.zeros((0, 1))), np.zeros(0, dtype=int))


class TestMetricsReport:
    def test_mean_of_one_run(self):
        runs = [RunStats(seed=1, train_accuracy=98.0, train_loss=0.1, val_accuracy=91.0, val_loss=0.3)]
        report = MetricsReport.from_runs(runs, np.zeros((2, 2), dtype=np.int64))
        assert report.ava == 91.0 and report.ata == 98.0

    def test_mean_of_two_runs(self):
        runs = [
            RunStats(seed=1, train_accuracy=99.0, train_loss=0.1, val_accuracy=90.0, val_loss=0.3),
            RunStats(seed=2, train_accuracy=97.0, train_loss=0.2, val_accuracy=94.0, val_loss=0.1),
        ]
        report = MetricsReport.from_runs(runs, np.zeros((2, 2), dtype=np.int64))
        assert report.ava == 92.0
        assert abs(report.atl - 0.15) < 1e-12


def small_benchmark(seed=0):
    return make_synthetic_benchmark(n_per_class=30, audio_dim=6, video_dim=8, seed=seed)


def small_config(**overrides):
    base = dict(strategy="intermediate", run_count=2, epochs=3, seed=0,
                intermediate_hidden=(8,), branch_hidden=(4,), combiner_hidden=(4,))
    base.update(overrides)
    return ExperimentConfig(**base)


class TestRunExperiment:
    def test_single_run_ava_is_that_runs_accuracy(self):
        report = run_experiment(small_config(run_count=1), small_benchmark())
        assert report.ava == report.per_run[0].val_accuracy
        assert report.avl == report.per_run[0].val_loss

    def test_determinism(self):
        a = run_experiment(small_config(), small_benchmark())
        b = run_experiment(small_config(), small_benchmark())
        assert a.to_dict() == b.to_dict()

    def test_confusion_sums_to_evaluated_count(self):
        data = small_benchmark()
        cfg = small_config(run_count=3)
        report = run_experiment(cfg, data)
        n_val = len(data.manifest) - int(0.8 * len(data.manifest))
        assert report.confusion.sum() == cfg.run_count * n_val

    def test_missing_artifacts(self, tmp_path):
        with pytest.raises(MissingArtifacts):
            load_experiment_data(tmp_path / "nope.tsv", tmp_path / "a.avfe", tmp_path / "v.avfe")

    def test_file_round_trip_matches_in_memory(self, tmp_path):
        data = small_benchmark()
        paths = write_benchmark_files(data, tmp_path)
        loaded = load_experiment_data(paths["manifest"], paths["audio"], paths["video"])
        assert np.allclose(loaded.audio, data.audio.astype(np.float32))
        a = run_experiment(small_config(), data)
        # f32 storage rounds the matrices, so reports agree but not bit-exactly
        b = run_experiment(small_config(), loaded)
        assert abs(a.ava - b.ava) < 8.0


class TestBenchmark:
    def test_bayes_targets(self):
        rates = bayes_accuracies()
        assert abs(rates["audio"] - 0.80) < 0.002
        assert abs(rates["video"] - 0.91) < 0.002
        assert 0.96 < rates["joint"] < 0.98
        # acceptance-grade gaps: joint beats video by >= 3 and audio by >= 15 points
        assert rates["joint"] >= rates["video"] + 0.03
        assert rates["joint"] >= rates["audio"] + 0.15

    def test_empirical_bayes_rule_matches_closed_form(self):
        # Monte Carlo with the optimal rules derived from the true parameters
        rng = np.random.default_rng(0)
        n = 200_000
        s = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        z = rng.standard_normal(n)
        a0 = s * BENCH_AUDIO_MEAN + BENCH_SHARED_COUPLING * z + BENCH_PRIVATE_SIGMA * rng.standard_normal(n)
        v0 = s * BENCH_VIDEO_MEAN - BENCH_SHARED_COUPLING * z + BENCH_PRIVATE_SIGMA * rng.standard_normal(n)
        rates = bayes_accuracies()
        audio_acc = np.mean((a0 > 0) == (s > 0))
        video_acc = np.mean((v0 > 0) == (s > 0))
        var = BENCH_SHARED_COUPLING**2 + BENCH_PRIVATE_SIGMA**2
        cov = np.array([[var, -BENCH_SHARED_COUPLING**2], [-BENCH_SHARED_COUPLING**2, var]])
        w = np.linalg.solve(cov, np.array([BENCH_AUDIO_MEAN, BENCH_VIDEO_MEAN]))
        joint_acc = np.mean(((a0 * w[0] + v0 * w[1]) > 0) == (s > 0))
        assert abs(audio_acc - rates["audio"]) < 0.005
        assert abs(video_acc - rates["video"]) < 0.005
        assert abs(joint_acc - rates["joint"]) < 0.005

    def test_benchmark_determinism_and_balance(self):
        a = make_synthetic_benchmark(n_per_class=10, audio_dim=4, video_dim=4, seed=3)
        b = make_synthetic_benchmark(n_per_class=10, audio_dim=4, video_dim=4, seed=3)
        assert np.array_equal(a.audio, b.audio)
        assert a.manifest == b.manifest
        assert a.manifest.is_balanced()


class TestCompare:
    def test_five_rows_in_fixed_order(self):
        report = compare_strategies(small_config(), small_benchmark())
        assert [name for name, _ in report.rows] == [
            "hybrid", "intermediate", "late", "video_only", "audio_only",
        ]

    def test_rows_share_splits(self):
        report = compare_strategies(small_config(), small_benchmark())
        seeds = [[r.seed for r in rep.per_run] for _, rep in report.rows]
        assert all(s == seeds[0] for s in seeds)

    def test_rerun_identical(self):
        a = compare_strategies(small_config(), small_benchmark())
        b = compare_strategies(small_config(), small_benchmark())
        assert a.to_json() == b.to_json()
        assert a.render_text() == b.render_text()

    def test_text_report_shape(self):
        report = compare_strategies(small_config(), small_benchmark())
        lines = report.render_text().strip().splitlines()
        assert len(lines) == 7  # header + rule + 5 rows
        assert lines[0].split() == ["Model", "ATA", "(%)", "ATL", "AVA", "(%)", "AVL"]


class TestRandomSearch:
    def test_budget_one_returns_single_sample(self):
        space = {"dropout": [0.3, 0.5], "epochs": {"min": 2, "max": 4, "type": "int"}}
        best, trials = random_search(space, 1, small_config(), small_benchmark())
        assert len(trials) == 1
        assert best == trials[0].config

    def test_single_point_space(self):
        space = {"dropout": [0.4]}
        best, trials = random_search(space, 3, small_config(), small_benchmark())
        assert len(trials) == 3
        assert best.dropout == 0.4
        assert all(t.config.dropout == 0.4 for t in trials)

    def test_deterministic_across_reruns(self):
        space = {"dropout": [0.3, 0.5], "learning_rate": {"min": 1e-4, "max": 1e-2, "log": True}}
        a_best, a_trials = random_search(space, 5, small_config(), small_benchmark())
        b_best, b_trials = random_search(space, 5, small_config(), small_benchmark())
        assert a_best == b_best
        assert [(t.ava, t.avl) for t in a_trials] == [(t.ava, t.avl) for t in b_trials]

    def test_tie_break_lower_avl_then_earlier(self):
        from avfusion.harness import SearchTrial

        trials = [
            SearchTrial(index=0, config=small_config(dropout=0.1), ava=90.0, avl=0.3),
            SearchTrial(index=1, config=small_config(dropout=0.2), ava=90.0, avl=0.2),
            SearchTrial(index=2, config=small_config(dropout=0.3), ava=90.0, avl=0.2),
        ]
        best = min(trials, key=lambda t: (-t.ava, t.avl, t.index))
        assert best.index == 1

    def test_empty_space_rejected(self):
        with pytest.raises(EmptySpace):
            random_search({}, 3, small_config(), small_benchmark())
        with pytest.raises(EmptySpace):
            random_search({"dropout": []}, 3, small_config(), small_benchmark())
        with pytest.raises(EmptySpace):
            random_search({"optimizer": ["sgd"]}, 1, small_config(), small_benchmark())

    def test_sampled_values_stay_in_ranges(self):
        space = {"dropout": [0.2, 0.4], "batch_size": {"min": 2, "max": 9, "type": "int"}}
        rng = np.random.default_rng(0)
        for _ in range(20):
            cfg = sample_search_config(rng, space, small_config())
            assert cfg.dropout in (0.2, 0.4)
            assert 2 <= cfg.batch_size <= 9
