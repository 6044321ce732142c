import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leafstem.cloud import LEAF, STEM
from leafstem.metrics import ConfusionMatrix, confusion, format_report, kappa, report_record, to_jsonl

from oracles import kappa_from_marginals


def test_perfect_prediction():
    truth = [LEAF] * 10 + [STEM] * 5
    cm = confusion(truth, truth)
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (10, 5, 0, 0)
    assert kappa(cm) == 1.0


def test_hand_enumerated_four_points():
    cm = confusion(["leaf", "leaf", "stem", "stem"], ["leaf", "stem", "leaf", "stem"])
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (1, 1, 1, 1)


def test_all_predicted_leaf():
    cm = confusion([LEAF] * 3 + [STEM] * 2, [LEAF] * 5)
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (3, 0, 2, 0)


def test_chance_level_kappa():
    cm = confusion([LEAF] * 50 + [STEM] * 50, [LEAF] * 100)
    assert cm.accuracy == 0.5
    assert kappa(cm) == 0.0


def test_degenerate_marginals():
    assert kappa(ConfusionMatrix(7, 0, 0, 0)) == 1.0
    assert kappa(ConfusionMatrix(0, 4, 0, 0)) == 1.0


def test_errors():
    with pytest.raises(ValueError):
        confusion([LEAF], [LEAF, STEM])
    with pytest.raises(ValueError):
        confusion([LEAF, 3], [LEAF, STEM])
    with pytest.raises(ValueError):
        kappa(ConfusionMatrix(0, 0, 0, 0))
    with pytest.raises(ValueError):
        ConfusionMatrix(-1, 0, 0, 0)


def test_random_matrices_match_oracle(rng):
    for _ in range(500):
        tp, tn, fp, fn = (int(v) for v in rng.integers(0, 10_000, size=4))
        if tp + tn + fp + fn == 0:
            continue
        assert abs(kappa(ConfusionMatrix(tp, tn, fp, fn)) - kappa_from_marginals(tp, tn, fp, fn)) <= 1e-12


labels = st.lists(st.sampled_from([LEAF, STEM]), min_size=1, max_size=200)


@given(st.data())
def test_marginal_identities(data):
    truth = data.draw(labels)
    pred = data.draw(st.lists(st.sampled_from([LEAF, STEM]), min_size=len(truth), max_size=len(truth)))
    cm = confusion(truth, pred)
    assert cm.tp + cm.fp == pred.count(LEAF)
    assert cm.tn + cm.fn == pred.count(STEM)
    assert cm.tp + cm.fn == truth.count(LEAF)
    assert cm.total == len(truth)
    k = kappa(cm)
    assert -1.0 <= k <= 1.0
    swapped = ConfusionMatrix(cm.tn, cm.tp, cm.fn, cm.fp)
    assert kappa(swapped) == pytest.approx(k, abs=1e-12)
    perm = np.random.default_rng(len(truth)).permutation(len(truth))
    assert confusion(np.array(truth)[perm].tolist(), np.array(pred)[perm].tolist()) == cm
    if cm.fp == cm.fn == 0 and cm.tp > 0 and cm.tn > 0:
        assert k == 1.0
    if k == 1.0 and cm.tp > 0 and cm.tn > 0:
        assert cm.fp == cm.fn == 0


def test_report_formats():
    cm = ConfusionMatrix(8, 3, 1, 2)
    rec = report_record(cm, "automated", 4, r1=0.2)
    line = to_jsonl(rec)
    back = json.loads(line)
    assert back == {"tp": 8, "tn": 3, "fp": 1, "fn": 2, "accuracy": 11 / 14, "kappa": kappa(cm),
                    "method": "automated", "seed": 4, "r1": 0.2}
    assert line.endswith("\n") and line.count("\n") == 1
    text = format_report(rec)
    assert "kappa=" in text and "automated" in text
