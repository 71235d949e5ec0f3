import numpy as np
import pytest

from cat_lab.core.estimator import Transcript
from cat_lab.core.irt_core import Item


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def multi_root_transcript():
    """Dati su cui l'equazione 3-PL grezza ha piu' radici"""
    items = [Item(a=1.0, b=0.0, c=0.0), Item(a=1.0, b=0.0, c=0.0), Item(a=5.0, b=4.0, c=0.25)]
    return Transcript.from_items(items, [1, 0, 1])


@pytest.fixture
def write_bank(tmp_path):
    """Scrive un file banca CSV e ne restituisce il path"""
    def _write(text: str, name: str = "bank.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write


@pytest.fixture
def random_transcript():
    """Generatore di transcript casuali con entrambe le risposte presenti"""
    def _make(rng, n, model):
        a = np.ones(n) if model == "rasch" else rng.uniform(0.5, 2.0, n)
        b = rng.uniform(-2.0, 2.0, n)
        c = rng.uniform(0.0, 0.3, n) if model == "3pl" else np.zeros(n)
        theta = rng.uniform(-2.0, 2.0)
        p = c + (1 - c) / (1 + np.exp(-a * (theta - b)))
        y = (rng.random(n) < p).astype(int)
        y[0], y[1] = 1, 0
        items = [Item(a=float(ai), b=float(bi), c=float(ci)) for ai, bi, ci in zip(a, b, c)]
        return Transcript.from_items(items, y.tolist())
    return _make
