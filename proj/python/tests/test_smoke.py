import numpy as np
import pytest

import desal

SMALL_GEN = {"n_train_ids": 6, "n_test_ids": 4, "utt_per_id": 10, "seed": 2}
QUICK_SAL = {"epochs_base": 20, "epochs_select": 20, "epochs_add": 20, "seed": 1}


def test_generate_shapes():
    data = desal.generate(SMALL_GEN)
    train, test = data["train"], data["test"]
    assert train["features"].shape == (60, 40)
    assert test["features"].shape == (40, 40)
    assert set(np.unique(train["labels"])) <= {0, 1}
    assert train["identities"].max() == 5
    assert [c[0] for c in train["channels"]] == ["verbal", "acoustic", "visual"]


def test_train_and_predict_are_deterministic():
    train = desal.generate(SMALL_GEN)["train"]
    args = (train["features"], train["labels"], train["identities"], QUICK_SAL)
    base, sal = desal.train(*args)
    assert desal.train(*args) == (base, sal)
    pred = desal.predict(sal, train["features"])
    proba = desal.predict_proba(sal, train["features"])
    assert pred.shape == (60,)
    assert np.array_equal(pred, (proba >= 0.5).astype(np.int64))


def test_run_experiment_report():
    cfg = {"gen": SMALL_GEN, "sal": QUICK_SAL, "seeds": [1], "modality_sets": [["verbal"], ["all"]],
           "n_permutations": 200}
    report = desal.run_experiment(cfg)
    assert [s["modality_set"] for s in report["summaries"]] == ["verbal", "all"]
    assert all(c["ok"] for c in report["cells"])


def test_permutation_and_errors():
    stat, p = desal.permutation_test([0] * 8, [1] * 8)
    assert p == pytest.approx(1 / 256)
    with pytest.raises(desal.DesalError):
        desal.permutation_test([0, 1], [1])
    with pytest.raises(desal.DesalError):
        desal.run_experiment({"seeds": []})
    assert desal.default_config()["val_frac"] == 0.2
