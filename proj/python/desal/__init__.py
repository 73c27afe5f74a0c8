"""Select-additive learning: confound-aware training on synthetic multimodal data."""

import json

import numpy as np

from . import _core
from ._core import DesalError

__all__ = ["DesalError", "default_config", "generate", "run_experiment", "train", "predict", "predict_proba",
           "permutation_test"]


def _dump(obj):
    return obj if isinstance(obj, str) else json.dumps(obj or {})


def default_config():
    return json.loads(_core.default_config())


def generate(gen=None):
    """Train and test splits as dicts with features, labels, identities and channels."""
    out = _core.generate(_dump(gen))
    for split in out.values():
        split["labels"] = np.asarray(split["labels"], dtype=np.int64)
        split["identities"] = np.asarray(split["identities"], dtype=np.int64)
    return out


def run_experiment(config=None):
    return json.loads(_core.run_experiment(_dump(config)))


def train(features, labels, identities, sal=None):
    """Returns (baseline_model, sal_model) as JSON documents."""
    base, added = _core.train(np.asarray(features, dtype=np.float64), list(map(int, labels)),
                              list(map(int, identities)), _dump(sal))
    return json.loads(base), json.loads(added)


def predict(model, features):
    return np.asarray(_core.predict(_dump(model), np.asarray(features, dtype=np.float64)), dtype=np.int64)


def predict_proba(model, features):
    return _core.predict_proba(_dump(model), np.asarray(features, dtype=np.float64))[:, 0]


def permutation_test(a, b, n_permutations=10000, seed=0):
    return _core.permutation_test(list(map(int, a)), list(map(int, b)), n_permutations, seed)
