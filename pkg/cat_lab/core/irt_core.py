"""
IRT Core - Curve caratteristiche degli item e informazione di Fisher
Modelli logistici Rasch, 2-PL e 3-PL (senza la costante di scala 1.7)
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit, log_expit

from cat_lab.core.errors import InvalidItemError


class ModelKind(Enum):
    """Famiglia di modelli logistici"""
    RASCH = "rasch"
    TWO_PL = "2pl"
    THREE_PL = "3pl"

    @classmethod
    def from_name(cls, name: str) -> "ModelKind":
        """
        Converte il nome usato da CLI/config nel ModelKind

        Args:
            name: "rasch", "2pl" o "3pl" (case insensitive)
        """
        key = name.strip().lower()
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"Modello sconosciuto: {name!r} (attesi: rasch, 2pl, 3pl)")

    def accepts(self, item: "Item") -> bool:
        """True se l'item appartiene a questa famiglia (Rasch: a=1, c=0; 2-PL: c=0)"""
        if self is ModelKind.RASCH:
            return item.a == 1.0 and item.c == 0.0
        if self is ModelKind.TWO_PL:
            return item.c == 0.0
        return True


@dataclass(frozen=True)
class Item:
    """Un item del test: discriminazione a, difficolta' b, guessing c"""
    a: float = 1.0
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        # La validazione avviene qui, una volta sola: le funzioni di valutazione non ricontrollano
        if not (math.isfinite(self.a) and self.a > 0):
            raise InvalidItemError(f"Discriminazione non valida: a={self.a} (serve a > 0)")
        if not math.isfinite(self.b):
            raise InvalidItemError(f"Difficolta' non finita: b={self.b}")
        if not (0.0 <= self.c < 1.0):
            raise InvalidItemError(f"Guessing non valido: c={self.c} (serve 0 <= c < 1)")

    @classmethod
    def rasch(cls, b: float) -> "Item":
        return cls(a=1.0, b=b, c=0.0)

    @property
    def kind(self) -> ModelKind:
        """Il modello piu' semplice che descrive l'item"""
        if self.c > 0.0:
            return ModelKind.THREE_PL
        if self.a != 1.0:
            return ModelKind.TWO_PL
        return ModelKind.RASCH


# ===== Funzioni vettorizzate sui parametri (usate nei loop caldi) =====

def logistic(t):
    """
    G(t) = e^t / (1 + e^t) in forma stabile

    expit non esponenzia mai un argomento positivo: satura a 0/1 senza overflow.
    Accetta scalari o array numpy.
    """
    return expit(t)


def log_logistic(t):
    """log G(t) stabile; log(1 - G(t)) = log_logistic(-t)"""
    return log_expit(t)


def icc_curve(theta, a, b, c):
    """
    Probabilita' di risposta corretta c + (1 - c) G(a (theta - b))

    Args:
        theta, a, b, c: scalari o array broadcastabili

    Returns:
        Probabilita' (stessa forma del broadcast)
    """
    return c + (1.0 - c) * expit(a * (theta - b))


def information_curve(theta, a, b, c):
    """
    Informazione di Fisher del modello 3-PL, vettorizzata

    Con p = G(t), q = 1 - G(t), t = a (theta - b) la forma
    (1 - c) a^2 e^{2t} / [(c + e^t)(1 + e^t)^2] diventa
    (1 - c) a^2 p^2 q / (p + c q), che non va mai in overflow.
    """
    t = a * (theta - b)
    p = expit(t)
    q = expit(-t)
    num = (1.0 - c) * a * a * p * p * q
    den = p + c * q
    # den == 0 solo con c == 0 e p saturato a 0: l'informazione e' 0
    safe = np.where(den > 0.0, den, 1.0)
    return np.where(den > 0.0, num / safe, 0.0)


def _optimal_log_offset(c):
    """log((1 + sqrt(1 + 8c)) / 2): distanza ottimale theta - b moltiplicata per a"""
    return np.log((1.0 + np.sqrt(1.0 + 8.0 * c)) / 2.0)


# ===== API sugli Item =====

def icc(theta: float, item: Item) -> float:
    """Curva caratteristica dell'item in theta"""
    return float(icc_curve(theta, item.a, item.b, item.c))


def fisher_info(theta: float, item: Item) -> float:
    """Informazione di Fisher dell'item in theta (sempre >= 0)"""
    return float(information_curve(theta, item.a, item.b, item.c))


def optimal_difficulty(theta, a, c):
    """
    Difficolta' che massimizza l'informazione per a e c fissati

    b = theta - (1/a) log((1 + sqrt(1 + 8c)) / 2); con c = 0 restituisce theta esatto.
    """
    return theta - _optimal_log_offset(c) / a


def max_info_closed_form(a, c):
    """
    Massimo dell'informazione sull'asse b, in forma chiusa

    a^2 / (8 (1 - c)^2) * [1 - 20c - 8c^2 + (1 + 8c)^{3/2}]
    """
    return a * a / (8.0 * (1.0 - c) ** 2) * (1.0 - 20.0 * c - 8.0 * c * c + (1.0 + 8.0 * c) ** 1.5)


def weight(a, c):
    """
    Peso dell'equazione di stima 3-PL modificata

    w = a (1 + sqrt(1 + 8c)) / (2c + 1 + sqrt(1 + 8c)); con c = 0 vale a.
    """
    root = np.sqrt(1.0 + 8.0 * c)
    return a * (1.0 + root) / (2.0 * c + 1.0 + root)


# Test del modulo
if __name__ == "__main__":
    print("\n🧪 Test irt_core\n")
    item = Item(a=1.0, b=optimal_difficulty(0.0, 1.0, 0.125), c=0.125)
    print(f"b ottimale (a=1, c=0.125): {item.b:.5f}")
    print(f"Informazione in b ottimale: {fisher_info(0.0, item):.5f}")
    print(f"Forma chiusa: {max_info_closed_form(1.0, 0.125):.5f}")
    print(f"Peso w(1, 0.25): {weight(1.0, 0.25):.5f}")
