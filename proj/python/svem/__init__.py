"""Self-validated ensemble models.

Tables are plain dicts mapping column names to sequences. Numeric columns
become float arrays; columns of strings are categorical.
"""

import json

import numpy as np

from . import _core
from ._core import ConfigError, DataError, NumericError, SvemError

__version__ = _core.version()

__all__ = [
    "ConfigError",
    "DataError",
    "Model",
    "NumericError",
    "SvemError",
    "build_spec",
    "draw_frw",
    "expand",
    "fit",
    "frw_weights",
    "gen_lnp",
    "geometric_score",
    "kish_neff",
    "pam",
]


def _split(table):
    order, numeric, categorical = [], {}, {}
    for name, values in table.items():
        order.append(name)
        values = list(values) if not isinstance(values, np.ndarray) else values
        if len(values) and isinstance(values[0], str):
            categorical[name] = [str(v) for v in values]
        else:
            numeric[name] = np.asarray(values, dtype=float).tolist()
    return order, numeric, categorical


def _join(order, numeric, categorical):
    return {n: np.asarray(numeric[n]) if n in numeric else list(categorical[n]) for n in order}


def frw_weights(u):
    """Training and validation weights from given uniforms."""
    train, valid = _core.frw_weights(np.asarray(u, dtype=float).tolist())
    return np.asarray(train), np.asarray(valid)


def draw_frw(n, seed):
    train, valid = _core.draw_frw(int(n), int(seed))
    return np.asarray(train), np.asarray(valid)


def kish_neff(w):
    """(n_eff, n_eff_adm) for a weight vector."""
    return _core.kish_neff(np.asarray(w, dtype=float).tolist())


def gen_lnp(n_runs=60, seed=1, noise_scale=1.0):
    return _join(*_core.gen_lnp(int(n_runs), int(seed), float(noise_scale)))


def build_spec(table, **options):
    """Expansion spec as a dict; options use the same keys as the CLI config."""
    return json.loads(_core.build_spec(*_split(table), json.dumps(options)))


def expand(spec, table):
    names, X = _core.expand(json.dumps(spec), *_split(table))
    return names, X


class Model:
    def __init__(self, document):
        self.document = document if isinstance(document, dict) else json.loads(document)
        self._text = json.dumps(self.document)

    @property
    def response(self):
        return self.document["response"]

    @property
    def coefficients(self):
        return np.asarray(self.document["coefficients"])

    def predict(self, table, level=None):
        """Ensemble mean, plus percentile bounds when level is given."""
        mean, lower, upper = _core.predict(self._text, *_split(table), level)
        if level is None:
            return mean
        return mean, lower, upper

    def to_json(self):
        return json.dumps(self.document, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls(json.load(f))

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json() + "\n")


def fit(spec, table, response, **options):
    return Model(_core.fit(json.dumps(spec), *_split(table), response, json.dumps(options)))


def geometric_score(d, weights, epsilon=1e-6):
    return _core.geometric_score(list(map(float, d)), list(map(float, weights)), epsilon)


def pam(distance, k):
    """(medoid indices, total cost)."""
    return _core.pam(np.asarray(distance, dtype=float), int(k))
