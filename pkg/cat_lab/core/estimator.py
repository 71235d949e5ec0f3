"""
Estimator - Equazioni di stima dell'abilita' e loro soluzione
Rasch, 2-PL, 3-PL grezza (diagnostica) e 3-PL modificata con pesi fissi
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from cat_lab.core.errors import (
    DegenerateTranscriptError,
    InitializationIncompleteError,
    ModeMismatchError,
    NonMonotoneModeError,
)
from cat_lab.core.irt_core import Item, ModelKind, information_curve, max_info_closed_form, weight

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
INITIAL_HALF_WIDTH = 4.0
BRACKET_LIMIT = 1e6


class EstimatingMode(Enum):
    """Equazione di stima da risolvere"""
    RASCH_SCORE = "rasch"
    TWO_PL_SCORE = "2pl"
    THREE_PL_RAW = "3pl-raw"
    THREE_PL_MODIFIED = "3pl"

    @property
    def monotone(self) -> bool:
        return self is not EstimatingMode.THREE_PL_RAW

    @classmethod
    def for_model(cls, model: ModelKind) -> "EstimatingMode":
        return {
            ModelKind.RASCH: cls.RASCH_SCORE,
            ModelKind.TWO_PL: cls.TWO_PL_SCORE,
            ModelKind.THREE_PL: cls.THREE_PL_MODIFIED,
        }[model]


class EstimateSource(Enum):
    ROOT_OF_EQUATION = "root"
    FALLBACK = "fallback"


@dataclass(frozen=True)
class AbilityEstimate:
    """Stima di theta con informazione osservata e origine (radice o fallback r_k)"""
    value: float
    observed_info: float
    source: EstimateSource = EstimateSource.ROOT_OF_EQUATION

    @property
    def is_fallback(self) -> bool:
        return self.source is EstimateSource.FALLBACK


@dataclass(frozen=True)
class Response:
    """Risposta binaria a un item (1 = corretta)"""
    item: Item
    y: int

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ValueError(f"Risposta non binaria: y={self.y}")


@dataclass
class Transcript:
    """
    Registro ordinato di item somministrati, risposte e stime dopo ogni step

    Le stime sono assenti prima di k0 e presenti da k0 in poi.
    """
    responses: List[Response] = field(default_factory=list)
    estimates: List[Optional[AbilityEstimate]] = field(default_factory=list)

    @classmethod
    def from_items(cls, items: Sequence[Item], ys: Sequence[int]) -> "Transcript":
        """Transcript senza stime, comodo per valutare le equazioni su dati fissati"""
        if len(items) != len(ys):
            raise ValueError("items e risposte hanno lunghezze diverse")
        return cls(responses=[Response(item, int(y)) for item, y in zip(items, ys)],
                   estimates=[None] * len(items))

    def __len__(self) -> int:
        return len(self.responses)

    def add(self, response: Response, estimate: Optional[AbilityEstimate] = None):
        self.responses.append(response)
        self.estimates.append(estimate)

    def attach_estimate(self, estimate: AbilityEstimate):
        """Registra la stima calcolata dopo l'ultimo step"""
        if not self.responses:
            raise ValueError("Nessuno step a cui associare la stima")
        self.estimates[-1] = estimate

    @property
    def items(self) -> List[Item]:
        return [r.item for r in self.responses]

    @property
    def ys(self) -> List[int]:
        return [r.y for r in self.responses]

    @property
    def k0(self) -> Optional[int]:
        """Primo step (1-based) la cui risposta differisce da y_1; None se non ancora avvenuto"""
        if not self.responses:
            return None
        first = self.responses[0].y
        for k, response in enumerate(self.responses, start=1):
            if response.y != first:
                return k
        return None

    @property
    def has_both_outcomes(self) -> bool:
        return self.k0 is not None

    @property
    def latest_estimate(self) -> Optional[AbilityEstimate]:
        for estimate in reversed(self.estimates):
            if estimate is not None:
                return estimate
        return None

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Parametri (a, b, c) e risposte y come array numpy"""
        a = np.array([r.item.a for r in self.responses], dtype=float)
        b = np.array([r.item.b for r in self.responses], dtype=float)
        c = np.array([r.item.c for r in self.responses], dtype=float)
        y = np.array([r.y for r in self.responses], dtype=float)
        return a, b, c, y

    def check_invariants(self) -> bool:
        """True se le stime rispettano la regola assente-prima / presente-da k0"""
        k0 = self.k0
        for k, estimate in enumerate(self.estimates, start=1):
            expected = k0 is not None and k >= k0
            if (estimate is not None) != expected:
                return False
        return True


# ===== Equazioni di stima (forma vettorizzata) =====

def check_mode(mode: EstimatingMode, a: np.ndarray, c: np.ndarray):
    """Verifica che la modalita' sia coerente con gli item"""
    if mode is EstimatingMode.RASCH_SCORE and (np.any(a != 1.0) or np.any(c != 0.0)):
        raise ModeMismatchError("RaschScore richiede item con a = 1 e c = 0")
    if mode is EstimatingMode.TWO_PL_SCORE and np.any(c != 0.0):
        raise ModeMismatchError("TwoPLScore richiede item con c = 0")


def mode_weights(mode: EstimatingMode, a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Pesi w_k (indipendenti da theta) delle modalita' monotone"""
    if mode is EstimatingMode.RASCH_SCORE:
        return np.ones_like(a)
    if mode is EstimatingMode.TWO_PL_SCORE:
        return a
    if mode is EstimatingMode.THREE_PL_MODIFIED:
        return weight(a, c)
    raise NonMonotoneModeError("ThreePLRaw ha pesi dipendenti da theta")


def weighted_residuals(theta, a, b, c, y, w):
    """
    Somma pesata dei residui sum_k w_k [y_k - c_k - (1 - c_k) G(a_k (theta - b_k))]

    theta puo' essere scalare, un vettore di punti (item 1-D) o un vettore
    per riga (item 2-D con una riga per replicazione): l'asse degli item e' l'ultimo.
    """
    theta = np.asarray(theta, dtype=float)[..., None]
    residual = y - c - (1.0 - c) * expit(a * (theta - b))
    return np.sum(w * residual, axis=-1)


def raw_score(theta, a, b, c, y):
    """Equazione di verosimiglianza 3-PL con pesi a p / (p + c q) dipendenti da theta"""
    theta = np.asarray(theta, dtype=float)[..., None]
    t = a * (theta - b)
    p = expit(t)
    q = expit(-t)
    den = p + c * q
    # den == 0 solo con c = 0 e p saturato: il peso e' a
    w = np.where(den > 0.0, a * p / np.where(den > 0.0, den, 1.0), a)
    residual = y - c - (1.0 - c) * p
    return np.sum(w * residual, axis=-1)


def score_arrays(theta, a, b, c, y, mode: EstimatingMode):
    if mode is EstimatingMode.THREE_PL_RAW:
        return raw_score(theta, a, b, c, y)
    return weighted_residuals(theta, a, b, c, y, mode_weights(mode, a, c))


def score(theta: float, transcript: Transcript, mode: EstimatingMode) -> float:
    """
    Valuta il lato sinistro dell'equazione di stima scelta

    Args:
        theta: punto di valutazione
        transcript: risposte raccolte (non vuoto)
        mode: equazione da valutare

    Returns:
        Valore della funzione di stima (strettamente decrescente per le modalita' monotone)
    """
    if not len(transcript):
        raise InitializationIncompleteError("Transcript vuoto")
    a, b, c, y = transcript.arrays()
    check_mode(mode, a, c)
    return float(score_arrays(theta, a, b, c, y, mode))


def solvable_arrays(a, c, y, mode: EstimatingMode):
    """Condizione di esistenza della radice (vettorizzata sull'ultimo asse)"""
    if not mode.monotone:
        raise NonMonotoneModeError("La condizione di esistenza vale solo per le equazioni monotone")
    if mode is EstimatingMode.THREE_PL_MODIFIED:
        w = weight(a, c)
        return np.sum(w * y, axis=-1) > np.sum(w * c, axis=-1)
    return np.ones(np.shape(y)[:-1], dtype=bool)


def solvable(transcript: Transcript, mode: EstimatingMode) -> bool:
    """
    True se l'equazione ha soluzione

    Per la 3-PL modificata: sum w_k Y_k > sum w_k c_k; per Rasch/2-PL basta avere entrambe le risposte.
    """
    if not transcript.has_both_outcomes:
        raise InitializationIncompleteError("Inizializzazione incompleta: servono risposte sia 0 sia 1")
    a, b, c, y = transcript.arrays()
    check_mode(mode, a, c)
    return bool(solvable_arrays(a, c, y, mode))


def fallback_value(k: int) -> float:
    """Successione predeterminata r_k = -ln(1 + k) - 2, decrescente verso -inf"""
    return -math.log1p(k) - 2.0


# ===== Root finding =====

def bisect_decreasing(
    f: Callable[[np.ndarray], np.ndarray],
    center,
    tol: float = DEFAULT_TOL,
    half_width: float = INITIAL_HALF_WIDTH,
    limit: float = BRACKET_LIMIT,
) -> np.ndarray:
    """
    Bisezione vettorizzata per funzioni strettamente decrescenti

    Il bracket iniziale [center - half_width, center + half_width] viene raddoppiato
    su ciascun lato finche' f cambia segno, poi bisecato fino a larghezza <= tol.
    Ogni componente evolve indipendentemente dalle altre: il risultato di una riga
    non dipende da quali altre righe sono nel batch.

    Args:
        f: funzione array -> array della stessa forma
        center: centro iniziale per componente
        tol: larghezza finale del bracket
        half_width: semi-ampiezza iniziale
        limit: oltre |theta| = limit senza cambio di segno si solleva DegenerateTranscriptError

    Returns:
        Array delle radici (punto medio del bracket finale; per i plateau a zero,
        punto medio dell'intervallo in cui f si annulla)
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    step_lo = np.full_like(center, half_width)
    step_hi = np.full_like(center, half_width)
    lo = center - step_lo
    hi = center + step_hi
    f_lo = f(lo)
    f_hi = f(hi)

    while True:
        need_lo = ~(f_lo > 0.0)
        need_hi = ~(f_hi < 0.0)
        if not (need_lo.any() or need_hi.any()):
            break
        step_lo = np.where(need_lo, 2.0 * step_lo, step_lo)
        step_hi = np.where(need_hi, 2.0 * step_hi, step_hi)
        lo = np.where(need_lo, center - step_lo, lo)
        hi = np.where(need_hi, center + step_hi, hi)
        if np.any(need_lo & (np.abs(lo) > limit)) or np.any(need_hi & (np.abs(hi) > limit)):
            raise DegenerateTranscriptError(
                f"Nessun cambio di segno entro |theta| = {limit:g}: transcript degenere"
            )
        logger.debug("Espansione bracket: lo=%s hi=%s", lo, hi)
        if need_lo.any():
            f_lo = np.where(need_lo, f(lo), f_lo)
        if need_hi.any():
            f_hi = np.where(need_hi, f(hi), f_hi)

    outer_hi = hi.copy()
    lo, hi, f_hi = _bisect(f, lo, hi, f_hi, tol, keep_zero_left=False)
    left_edge = 0.5 * (lo + hi)

    # f(hi) == 0 esatto: la funzione e' nulla su un intervallo, cerco anche il bordo destro
    plateau = f_hi == 0.0
    if not plateau.any():
        return left_edge
    lo2, hi2, _ = _bisect(f, np.where(plateau, hi, outer_hi), outer_hi, f_hi, tol,
                          keep_zero_left=True, mask=plateau)
    right_edge = 0.5 * (lo2 + hi2)
    return np.where(plateau, 0.5 * (left_edge + right_edge), left_edge)


def _bisect(f, lo, hi, f_hi, tol, keep_zero_left, mask=None):
    """Ciclo di bisezione; keep_zero_left decide da che parte vanno i punti con f == 0"""
    lo = lo.copy()
    hi = hi.copy()
    f_hi = f_hi.copy()
    if mask is None:
        mask = np.ones(lo.shape, dtype=bool)
    while True:
        mid = 0.5 * (lo + hi)
        active = mask & ((hi - lo) > tol) & (mid > lo) & (mid < hi)
        if not active.any():
            return lo, hi, f_hi
        f_mid = f(mid)
        right = (f_mid >= 0.0) if keep_zero_left else (f_mid > 0.0)
        move_lo = active & right
        move_hi = active & ~right
        lo = np.where(move_lo, mid, lo)
        hi = np.where(move_hi, mid, hi)
        f_hi = np.where(move_hi, f_mid, f_hi)


def solve_ability(
    transcript: Transcript,
    mode: EstimatingMode,
    fallback_index: int,
    tol: float = DEFAULT_TOL,
) -> AbilityEstimate:
    """
    Risolve l'equazione di stima per theta

    Args:
        transcript: risposte raccolte, con entrambi gli esiti
        mode: modalita' monotona (RaschScore, TwoPLScore, ThreePLModified)
        fallback_index: indice k usato per r_k quando la condizione di esistenza fallisce
        tol: tolleranza sulla larghezza del bracket

    Returns:
        AbilityEstimate con sorgente radice o fallback
    """
    if not mode.monotone:
        raise NonMonotoneModeError("solve_ability accetta solo equazioni monotone")
    if not transcript.has_both_outcomes:
        raise InitializationIncompleteError("Inizializzazione incompleta: servono risposte sia 0 sia 1")

    a, b, c, y = transcript.arrays()
    check_mode(mode, a, c)

    if not bool(solvable_arrays(a, c, y, mode)):
        value = fallback_value(fallback_index)
        logger.debug("Condizione di esistenza non soddisfatta: fallback r_%d = %.6f", fallback_index, value)
        return AbilityEstimate(value, float(np.sum(information_curve(value, a, b, c))), EstimateSource.FALLBACK)

    w = mode_weights(mode, a, c)
    previous = transcript.latest_estimate
    center = previous.value if previous is not None else 0.0

    root = float(bisect_decreasing(lambda th: weighted_residuals(th, a, b, c, y, w), center, tol)[0])
    return AbilityEstimate(root, float(np.sum(information_curve(root, a, b, c))))


def find_roots_raw(
    transcript: Transcript,
    theta_range: Tuple[float, float] = (-10.0, 10.0),
    grid_points: int = 2001,
) -> List[float]:
    """
    Tutte le radici dell'equazione 3-PL grezza trovate su una griglia

    Ogni cambio di segno tra punti consecutivi viene raffinato con brentq.
    Serve a mostrare che l'equazione grezza puo' avere piu' radici.
    """
    if grid_points < 2:
        raise ValueError("Servono almeno 2 punti di griglia")
    lo, hi = theta_range
    if not lo < hi:
        return []

    a, b, c, y = transcript.arrays()
    grid = np.linspace(lo, hi, grid_points)
    values = raw_score(grid, a, b, c, y)

    def f(theta):
        return float(raw_score(theta, a, b, c, y))

    roots = []
    for i in range(grid_points):
        if values[i] == 0.0:
            roots.append(float(grid[i]))
        elif i + 1 < grid_points and values[i + 1] != 0.0 and np.sign(values[i]) != np.sign(values[i + 1]):
            roots.append(float(brentq(f, grid[i], grid[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps)))
    return sorted(roots)


def observed_info(theta: float, transcript: Transcript) -> float:
    """Informazione di Fisher osservata: somma delle informazioni degli item in theta"""
    if not len(transcript):
        return 0.0
    a, b, c, _ = transcript.arrays()
    return float(np.sum(information_curve(theta, a, b, c)))


def normalizer_v(transcript: Transcript) -> float:
    """v_n = somma dei massimi di informazione in forma chiusa (n/4 per Rasch)"""
    if not len(transcript):
        return 0.0
    a, _, c, _ = transcript.arrays()
    return float(np.sum(max_info_closed_form(a, c)))
