"""
Designer - Selezione sequenziale degli item
Ladder di inizializzazione, regole sulla difficolta', schedule di a e c, banche finite
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Set, Tuple, Union

import numpy as np

from cat_lab.core.errors import BankExhaustedError, ConfigError, ScheduleError
from cat_lab.core.estimator import Transcript
from cat_lab.core.irt_core import Item, ModelKind, information_curve, optimal_difficulty

logger = logging.getLogger(__name__)


# ===== Schedule della discriminazione a_k =====

@dataclass(frozen=True)
class Constant:
    a: float = 1.0


@dataclass(frozen=True)
class LinearAscending:
    lo: float = 0.5
    hi: float = 2.0


@dataclass(frozen=True)
class LinearDescending:
    hi: float = 2.0
    lo: float = 0.5


@dataclass(frozen=True)
class Stratified:
    """a-stratificato: livelli crescenti, uno per blocco di block_length item"""
    levels: Tuple[float, ...] = (0.6, 1.0, 1.6)
    block_length: int = 10


@dataclass(frozen=True)
class Explicit:
    sequence: Tuple[float, ...] = ()


@dataclass(frozen=True)
class CubicDivergent:
    """a_k = k^3: modalita' controesempio, ignora i bound [m, M]"""
    pass


ASchedule = Union[Constant, LinearAscending, LinearDescending, Stratified, Explicit, CubicDivergent]


# ===== Regole sul guessing c_k =====

@dataclass(frozen=True)
class NoGuessing:
    pass


@dataclass(frozen=True)
class ConstantGuessing:
    c: float = 0.2


@dataclass(frozen=True)
class ExplicitGuessing:
    sequence: Tuple[float, ...] = ()


CRule = Union[NoGuessing, ConstantGuessing, ExplicitGuessing]


class DifficultyRule(Enum):
    PLAIN_THETA = "plain"
    INFO_OPTIMAL_OFFSET = "offset"


@dataclass(frozen=True)
class DesignPolicy:
    """Tutte le scelte di disegno: ladder iniziale, schedule di a e c, regola su b"""
    b1: float = 0.0
    eps0: float = 1.0
    a_schedule: ASchedule = field(default_factory=Constant)
    a_bounds: Tuple[float, float] = (0.5, 2.0)
    c_rule: CRule = field(default_factory=NoGuessing)
    delta0: float = 0.5
    b_rule: DifficultyRule = DifficultyRule.INFO_OPTIMAL_OFFSET

    @classmethod
    def rasch(cls, **overrides) -> "DesignPolicy":
        return cls(a_schedule=Constant(1.0), c_rule=NoGuessing(), **overrides)

    @property
    def counterexample_mode(self) -> bool:
        return isinstance(self.a_schedule, CubicDivergent)


@dataclass(frozen=True)
class PolicyIssue:
    """Violazione (severity "error") o avviso ("warning") trovato in una policy"""
    code: str
    message: str
    severity: str = "error"


# ===== Banche di item =====

@dataclass(frozen=True)
class IdealizedBank:
    """Continuo ideale di item: qualsiasi (a, b, c) e' disponibile"""
    pass


@dataclass(frozen=True)
class FiniteBank:
    """Banca finita, immutabile; gli indici usati vivono nella SessionState"""
    items: Tuple[Item, ...]

    def __post_init__(self):
        if not self.items:
            raise ConfigError("La banca finita non contiene item")

    def __len__(self) -> int:
        return len(self.items)

    def parameter_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (np.array([it.a for it in self.items], dtype=float),
                np.array([it.b for it in self.items], dtype=float),
                np.array([it.c for it in self.items], dtype=float))


ItemBank = Union[IdealizedBank, FiniteBank]


class Phase(Enum):
    INITIALIZING = "initializing"
    ADAPTIVE = "adaptive"


@dataclass
class SessionState:
    """Stato mutabile di una singola sessione (un solo proprietario)"""
    transcript: Transcript = field(default_factory=Transcript)
    test_length: int = 1
    used: Set[int] = field(default_factory=set)

    @property
    def phase(self) -> Phase:
        return Phase.INITIALIZING if self.transcript.k0 is None else Phase.ADAPTIVE

    @property
    def step_index(self) -> int:
        """Numero di item gia' somministrati"""
        return len(self.transcript)


# ===== Operazioni =====

def a_at(schedule: ASchedule, k: int, n_total: int) -> float:
    """
    Discriminazione a_k dello step k (1-based)

    Args:
        schedule: schedule della discriminazione
        k: indice dello step
        n_total: lunghezza del test (serve agli schedule lineari)
    """
    if isinstance(schedule, CubicDivergent):
        if k < 1:
            raise ScheduleError(f"Indice di step non valido: k={k}")
        return float(k) ** 3
    if not 1 <= k <= n_total:
        raise ScheduleError(f"Indice di step fuori range: k={k}, n_total={n_total}")

    match schedule:
        case Constant(a=a):
            return float(a)
        case LinearAscending(lo=lo, hi=hi):
            if n_total == 1:
                return float(lo)
            return lo + (hi - lo) * (k - 1) / (n_total - 1)
        case LinearDescending(hi=hi, lo=lo):
            if n_total == 1:
                return float(hi)
            return hi - (hi - lo) * (k - 1) / (n_total - 1)
        case Stratified(levels=levels, block_length=block):
            level = min(math.ceil(k / block), len(levels))
            return float(levels[level - 1])
        case Explicit(sequence=sequence):
            if k > len(sequence):
                raise ScheduleError(f"Sequenza esplicita troppo corta: serve a_{k}, lunghezza {len(sequence)}")
            return float(sequence[k - 1])
    raise ScheduleError(f"Schedule sconosciuto: {schedule!r}")


def c_at(rule: CRule, k: int) -> float:
    """Guessing c_k dello step k (1-based)"""
    match rule:
        case NoGuessing():
            return 0.0
        case ConstantGuessing(c=c):
            return float(c)
        case ExplicitGuessing(sequence=sequence):
            if not 1 <= k <= len(sequence):
                raise ScheduleError(f"Sequenza di guessing troppo corta: serve c_{k}, lunghezza {len(sequence)}")
            return float(sequence[k - 1])
    raise ScheduleError(f"Regola di guessing sconosciuta: {rule!r}")


def _scheduled_a_values(schedule: ASchedule) -> List[float]:
    match schedule:
        case Constant(a=a):
            return [a]
        case LinearAscending(lo=lo, hi=hi) | LinearDescending(hi=hi, lo=lo):
            return [lo, hi]
        case Stratified(levels=levels):
            return list(levels)
        case Explicit(sequence=sequence):
            return list(sequence)
    return []


def _scheduled_c_values(rule: CRule) -> List[float]:
    match rule:
        case ConstantGuessing(c=c):
            return [c]
        case ExplicitGuessing(sequence=sequence):
            return list(sequence)
    return [0.0]


def validate_policy(policy: DesignPolicy) -> List[PolicyIssue]:
    """
    Raccoglie tutte le violazioni degli invarianti della policy

    Returns:
        Lista vuota se la policy e' valida; CubicDivergent produce solo un avviso
    """
    issues: List[PolicyIssue] = []
    m, M = policy.a_bounds

    if not (0 < m <= M < math.inf):
        issues.append(PolicyIssue("bounds_invalid", f"Bound non validi: serve 0 < m <= M < inf, trovato ({m}, {M})"))
    if not policy.eps0 > 0:
        issues.append(PolicyIssue("eps0_nonpositive", f"eps0 deve essere > 0, trovato {policy.eps0}"))
    if not 0 < policy.delta0 <= 1:
        issues.append(PolicyIssue("delta0_invalid", f"delta0 deve stare in (0, 1], trovato {policy.delta0}"))

    if policy.counterexample_mode:
        issues.append(PolicyIssue(
            "counterexample_mode",
            "a_k = k^3: modalita' controesempio che viola la teoria (bound [m, M] ignorati)",
            severity="warning",
        ))
    else:
        if isinstance(policy.a_schedule, Stratified):
            levels = list(policy.a_schedule.levels)
            if policy.a_schedule.block_length < 1:
                issues.append(PolicyIssue("block_invalid", "block_length deve essere >= 1"))
            if levels != sorted(levels):
                issues.append(PolicyIssue("strat_not_ascending", f"Livelli non crescenti: {levels}"))
        for a in _scheduled_a_values(policy.a_schedule):
            if a < m:
                issues.append(PolicyIssue("a_below_m", f"a = {a} sotto il minimo m = {m}"))
            elif a > M:
                issues.append(PolicyIssue("a_exceeds_M", f"a = {a} supera il massimo M = {M}"))

    ceiling = 1.0 - policy.delta0
    for c in _scheduled_c_values(policy.c_rule):
        if not 0.0 <= c < 1.0:
            issues.append(PolicyIssue("c_out_of_range", f"c = {c} fuori da [0, 1)"))
        elif c > ceiling:
            issues.append(PolicyIssue("c_exceeds_ceiling", f"c = {c} supera il tetto 1 - delta0 = {ceiling}"))

    return issues


def policy_errors(policy: DesignPolicy) -> List[PolicyIssue]:
    return [issue for issue in validate_policy(policy) if issue.severity == "error"]


def check_policy_for_model(policy: DesignPolicy, model: ModelKind):
    """Rasch impone a = 1 e c = 0, il 2-PL impone c = 0"""
    if model is ModelKind.RASCH and policy.a_schedule != Constant(1.0):
        raise ConfigError("Il modello Rasch richiede lo schedule Constant(1.0)")
    if model in (ModelKind.RASCH, ModelKind.TWO_PL) and not isinstance(policy.c_rule, NoGuessing):
        raise ConfigError(f"Il modello {model.value} richiede c = 0")


def ladder_difficulty(policy: DesignPolicy, step_index: int, first_response: Optional[int]) -> float:
    """
    Difficolta' della ladder di inizializzazione

    b = b1 + s * eps0 * step_index, con s = +1 dopo y_1 = 1 e s = -1 dopo y_1 = 0.
    """
    if step_index == 0 or first_response is None:
        return policy.b1
    direction = 1.0 if first_response == 1 else -1.0
    return policy.b1 + direction * policy.eps0 * step_index


def design_difficulty(policy: DesignPolicy, theta_hat, a, c):
    """Regola adattiva su b: theta_hat oppure l'offset che massimizza l'informazione"""
    if policy.b_rule is DifficultyRule.PLAIN_THETA:
        return theta_hat
    return optimal_difficulty(theta_hat, a, c)


def select_from_bank(bank: FiniteBank, target: float, used: Set[int]) -> int:
    """Indice dell'item non usato con informazione massima in target (pareggi: indice minore)"""
    if len(used) >= len(bank):
        raise BankExhaustedError(f"Banca esaurita: {len(bank)} item tutti gia' somministrati")
    a, b, c = bank.parameter_arrays()
    info = information_curve(target, a, b, c)
    if used:
        info = info.copy()
        info[list(used)] = -np.inf
    return int(np.argmax(info))


def next_item(state: SessionState, policy: DesignPolicy, bank: ItemBank) -> Item:
    """
    Sceglie il prossimo item della sessione

    Args:
        state: stato della sessione; per banche finite l'indice scelto viene aggiunto a state.used
        policy: policy di disegno
        bank: banca ideale o finita

    Returns:
        L'item da somministrare come step numero state.step_index + 1
    """
    transcript = state.transcript
    k = state.step_index + 1

    if state.phase is Phase.INITIALIZING:
        first = transcript.responses[0].y if len(transcript) else None
        target = ladder_difficulty(policy, state.step_index, first)
    else:
        estimate = transcript.latest_estimate
        if estimate is None:
            raise ConfigError("Fase adattiva senza stima disponibile")
        target = estimate.value

    if isinstance(bank, FiniteBank):
        index = select_from_bank(bank, target, state.used)
        state.used.add(index)
        logger.debug("Step %d: item %d dalla banca (target %.4f)", k, index, target)
        return bank.items[index]

    a = a_at(policy.a_schedule, k, state.test_length)
    c = c_at(policy.c_rule, k)
    if state.phase is Phase.INITIALIZING:
        b = target
    else:
        b = float(design_difficulty(policy, target, a, c))
    return Item(a=a, b=b, c=c)
