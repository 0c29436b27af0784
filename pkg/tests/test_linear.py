import math

import numpy as np
import pytest

from chromafeat.encoders import EncodedDataset
from chromafeat.linear import (
    LinearModel,
    TrainingError,
    accuracy,
    append_metrics,
    load_model,
    log_loss,
    save_model,
    train_logistic,
)

LN2 = math.log(2.0)


def encoded(rows, dim):
    labels = np.asarray([y for y, _, _ in rows], dtype=np.int8)
    data = [
        (np.asarray(idx, dtype=np.int64), np.asarray(val, dtype=np.float64))
        for _, idx, val in rows
    ]
    return EncodedDataset(dim, labels, data)


class TestTrain:
    def test_all_negative_labels_drive_loss_below_ln2(self):
        rows = [(0, [i % 4], [1.0]) for i in range(200)]
        data = encoded(rows, 4)
        model = train_logistic(data)
        assert log_loss(model, data) < LN2
        assert all(model.weights[:4] <= 0)

    def test_bias_only_approaches_base_rate(self):
        rows = [(1 if i % 4 == 0 else 0, [], []) for i in range(2000)]
        data = encoded(rows, 3)
        model = train_logistic(data, epochs=20)
        p = model.predict_proba(np.empty(0, dtype=np.int64), np.empty(0))
        assert p == pytest.approx(0.25, abs=0.03)

    def test_linearly_separable_reaches_perfect_accuracy(self):
        # feature 0 -> label 1, feature 1 -> label 0
        train_rows = [(i % 2 == 0 and 1 or 0, [i % 2], [1.0]) for i in range(100)]
        test_rows = [(1, [0], [1.0]), (0, [1], [1.0])] * 10
        model = train_logistic(encoded(train_rows, 2), epochs=5)
        assert accuracy(model, encoded(test_rows, 2)) == 1.0

    def test_deterministic_given_data_order(self):
        rows = [(i % 2, [i % 3], [1.0]) for i in range(50)]
        a = train_logistic(encoded(rows, 3))
        b = train_logistic(encoded(rows, 3))
        assert np.array_equal(a.weights, b.weights)
        assert a.bias == b.bias

    def test_single_pass_is_default(self):
        rows = [(i % 2, [0], [1.0]) for i in range(10)]
        one = train_logistic(encoded(rows, 1))
        two = train_logistic(encoded(rows, 1), epochs=2)
        assert not np.array_equal(one.weights, two.weights)

    def test_l2_shrinks_weights(self):
        rows = [(1, [0], [1.0]) for _ in range(100)]
        plain = train_logistic(encoded(rows, 1))
        reg = train_logistic(encoded(rows, 1), l2=5.0)
        assert abs(reg.weights[0]) < abs(plain.weights[0])

    def test_non_finite_input_aborts(self):
        rows = [(1, [0], [float("inf")])]
        with np.errstate(invalid="ignore"):
            with pytest.raises(TrainingError):
                train_logistic(encoded(rows, 1))


class TestLogLoss:
    def _fixed_model(self, dim=3):
        return LinearModel(
            weights=np.zeros(dim), bias=0.0, grad_sq=np.zeros(dim), bias_grad_sq=0.0, lr=0.5
        )

    def test_half_probability_gives_ln2(self):
        model = self._fixed_model()
        data = encoded([(1, [], []), (0, [], [])], 3)
        assert log_loss(model, data) == pytest.approx(LN2, abs=1e-12)

    def test_hand_computed_three_examples(self):
        # p = (0.9, 0.2, 0.5), y = (1, 0, 1): mean of -(ln .9 + ln .8 + ln .5)
        model = self._fixed_model(3)
        model.weights[:] = [math.log(9), math.log(0.25), 0.0]
        data = encoded([(1, [0], [1.0]), (0, [1], [1.0]), (1, [2], [1.0])], 3)
        expected = -(math.log(0.9) + math.log(0.8) + math.log(0.5)) / 3
        assert expected == pytest.approx(0.3405504158439937, abs=1e-12)
        assert log_loss(model, data) == pytest.approx(expected, abs=1e-9)

    def test_clipping_floors_perfect_predictions(self):
        model = self._fixed_model(1)
        model.weights[0] = 50.0  # saturates the sigmoid
        data = encoded([(1, [0], [1.0])], 1)
        assert log_loss(model, data) == pytest.approx(-math.log(1 - 1e-7), abs=1e-9)

    def test_empty_test_set_rejected(self):
        with pytest.raises(TrainingError):
            log_loss(self._fixed_model(), encoded([], 3))


class TestModelIO:
    def test_roundtrip(self, tmp_path):
        rows = [(i % 2, [i % 3], [1.0]) for i in range(60)]
        data = encoded(rows, 3)
        model = train_logistic(data)
        p = tmp_path / "model.json"
        save_model(model, p)
        back = load_model(p)
        assert np.array_equal(back.weights, model.weights)
        assert back.bias == model.bias
        assert log_loss(back, data) == log_loss(model, data)

    def test_metrics_append(self, tmp_path):
        import json

        p = tmp_path / "metrics.jsonl"
        append_metrics(p, {"dataset": "x", "encoder": "ft", "budget": 8, "seed": 0, "loss": 0.5})
        append_metrics(p, {"dataset": "x", "encoder": "ht", "budget": 8, "seed": 0, "loss": 0.6})
        lines = [json.loads(l) for l in p.read_text().splitlines()]
        assert len(lines) == 2
        assert lines[1]["encoder"] == "ht"
