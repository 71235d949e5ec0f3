"""
Counterexample - Traiettoria divergente con a_k = k^3 e informazione limitata con a_j = 1/j

Riproduce in modo deterministico il caso in cui, senza bound sulla discriminazione,
la stima resta per sempre sotto theta - 1, e certifica i bound passo per passo.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.special import expit, log_expit

from cat_lab.core.errors import BoundViolationError, ConfigError, PreconditionError
from cat_lab.core.estimator import DEFAULT_TOL, EstimatingMode, Response, Transcript, solve_ability
from cat_lab.core.irt_core import Item, ModelKind
from cat_lab.design.designer import (
    CubicDivergent,
    DesignPolicy,
    DifficultyRule,
    Explicit,
    a_at,
    design_difficulty,
    ladder_difficulty,
)
from cat_lab.experiments.simulator import SimulationConfig, simulate_replications

logger = logging.getLogger(__name__)

TAIL_CERTIFICATE = 1e-15
PI2_6 = math.pi ** 2 / 6.0
TRACE_COLUMNS = ["k", "a", "b", "y", "theta_hat", "bound_a13", "below_theta_minus_1"]


# ===== Ricerca di n0 =====

def _tail_ratio_bound(k: int) -> float:
    """Maggiorante di t_{j+1} / t_j per ogni j >= k, con t_j = j^3 / (1 + e^j)"""
    return ((k + 1) / k) ** 3 * math.exp(-1.0) * (1.0 + (math.e - 1.0) / (1.0 + math.exp(k + 1)))


def tail_sum(start: int) -> float:
    """
    sum_{k >= start} k^3 / (1 + e^k), con resto certificato < 1e-15

    Il resto dopo il termine K e' maggiorato da t_{K+1} / (1 - rho), dove rho
    maggiora tutti i rapporti successivi.
    """
    total = 0.0
    k = max(int(start), 1)
    while True:
        total += k ** 3 * expit(-k)
        following = (k + 1) ** 3 * expit(-(k + 1))
        ratio = _tail_ratio_bound(k + 1)
        if ratio < 1.0 and following / (1.0 - ratio) < TAIL_CERTIFICATE:
            return total + following / (1.0 - ratio)
        k += 1


def _conditions_hold(n0: int, eps0: float) -> bool:
    m = n0 + 1
    tail_ok = tail_sum(m) < 1.0 / 3.0
    jump_ok = m ** 3 * expit(-(m ** 3) * eps0) < 1.0 / 6.0
    cubes_ok = 3 * m ** 3 < (n0 * m // 2) ** 2
    return tail_ok and jump_ok and cubes_ok


def find_n0(eps0: float) -> int:
    """
    Il piu' piccolo n0 che soddisfa le tre condizioni dell'esempio di inconsistenza

    Args:
        eps0: passo della ladder iniziale (> 0)

    Returns:
        n0 (13 per eps0 = 1); il risultato viene ricontrollato con check_example_conditions
    """
    if not eps0 > 0:
        raise ConfigError(f"eps0 deve essere > 0, trovato {eps0}")
    n0 = 1
    while not _conditions_hold(n0, eps0):
        n0 += 1
    check = check_example_conditions(n0, eps0)
    if not check.all_hold:
        raise BoundViolationError(n0, f"verifica indipendente di n0 fallita: {check}")
    logger.info("n0 = %d per eps0 = %g", n0, eps0)
    return n0


@dataclass(frozen=True)
class ExampleConditions:
    """Valori e verdetti delle tre condizioni su n0"""
    n0: int
    tail: float
    jump: float
    cubes_lhs: int
    cubes_rhs: int

    @property
    def tail_ok(self) -> bool:
        return self.tail < 1.0 / 3.0

    @property
    def jump_ok(self) -> bool:
        return self.jump < 1.0 / 6.0

    @property
    def cubes_ok(self) -> bool:
        return self.cubes_lhs < self.cubes_rhs

    @property
    def all_hold(self) -> bool:
        return self.tail_ok and self.jump_ok and self.cubes_ok


def check_example_conditions(n0: int, eps0: float, terms: int = 400) -> ExampleConditions:
    """
    Rivaluta le condizioni per forza bruta, per un percorso indipendente da find_n0

    Coda: somma diretta in log-space di `terms` termini piu' il maggiorante
    integrale k^3 e^{-k} oltre l'ultimo; salto in log-space; cubi per somma esplicita.
    """
    m = n0 + 1
    ks = np.arange(m, m + terms, dtype=float)
    direct = float(np.sum(np.exp(3.0 * np.log(ks) - np.logaddexp(0.0, ks))))
    last = m + terms
    # int_{last-1}^inf x^3 e^{-x} dx = e^{-(last-1)} P(last-1), P(x) = x^3 + 3x^2 + 6x + 6
    x = last - 1.0
    remainder = math.exp(-x) * (x ** 3 + 3 * x ** 2 + 6 * x + 6)
    jump = math.exp(3.0 * math.log(m) - float(np.logaddexp(0.0, m ** 3 * eps0)))
    return ExampleConditions(
        n0=n0,
        tail=direct + remainder,
        jump=jump,
        cubes_lhs=3 * m ** 3,
        cubes_rhs=sum(k ** 3 for k in range(1, n0 + 1)),
    )


# ===== Traiettoria divergente =====

@dataclass(frozen=True)
class DivergenceScenario:
    """
    Parametri dell'esempio di inconsistenza

    n0=None lo calcola con find_n0(eps0).
    """
    theta_true: float = 0.0
    theta0: float = -2.7
    eps0: float = 1.0
    n0: Optional[int] = None
    horizon: int = 200
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        limit = self.theta_true - 1.0 - PI2_6
        if not self.theta0 < limit:
            raise PreconditionError(
                f"Serve theta0 < theta - 1 - pi^2/6 = {limit:.6f}, trovato theta0 = {self.theta0}")
        if not self.eps0 > 0:
            raise PreconditionError(f"eps0 deve essere > 0, trovato {self.eps0}")
        if self.horizon < 1:
            raise PreconditionError(f"horizon deve essere >= 1, trovato {self.horizon}")
        if self.n0 is None:
            object.__setattr__(self, "n0", find_n0(self.eps0))
        elif not check_example_conditions(self.n0, self.eps0).all_hold:
            raise PreconditionError(f"n0 = {self.n0} non soddisfa le condizioni per eps0 = {self.eps0}")

    @property
    def policy(self) -> DesignPolicy:
        """Stessa ladder del designer, con b1 = theta0 e a_k = k^3"""
        return DesignPolicy(b1=self.theta0, eps0=self.eps0, a_schedule=CubicDivergent(),
                            b_rule=DifficultyRule.PLAIN_THETA)


@dataclass(frozen=True)
class TraceRecord:
    k: int
    a: float
    b: float
    y: int
    theta_hat: float
    bound_a13: float
    bound_ok: bool
    below_theta_minus_1: bool
    log_prob_term: float


@dataclass
class DivergenceTrace:
    scenario: DivergenceScenario
    records: List[TraceRecord] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)

    @property
    def n0(self) -> int:
        return self.scenario.n0

    @property
    def passed(self) -> bool:
        return not self.violations

    def theta_at(self, k: int) -> float:
        """theta_hat_k; k = 0 restituisce il valore iniziale theta0"""
        if k == 0:
            return self.scenario.theta0
        return self.records[k - 1].theta_hat

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([vars(record) for record in self.records])
        frame["below_theta_minus_1"] = frame["below_theta_minus_1"].astype(int)
        return frame

    def to_csv(self, path):
        self.to_frame()[TRACE_COLUMNS].to_csv(
            path, index=False, lineterminator="\n", na_rep="", float_format="%.17g")


def divergent_trajectory(scenario: DivergenceScenario, strict: bool = True) -> DivergenceTrace:
    """
    Genera la traiettoria deterministica sull'evento A (y = 0 fino a n0, poi sempre 1)

    Ogni step dopo n0 certifica: theta_hat_k <= theta0 + sum_{j=n0+1}^k 1/j^2,
    theta_hat_k < theta - 1, theta_hat_{n0+1} <= theta0, stime non decrescenti.

    Args:
        scenario: parametri validati
        strict: se True la prima violazione solleva BoundViolationError,
            altrimenti le violazioni vengono raccolte in trace.violations
    """
    policy = scenario.policy
    theta = scenario.theta_true
    n0 = scenario.n0
    slack = 10.0 * scenario.tol
    trace = DivergenceTrace(scenario)
    transcript = Transcript()
    bound = scenario.theta0
    previous = scenario.theta0

    def violation(k: int, message: str):
        if strict:
            raise BoundViolationError(k, message)
        trace.violations.append(f"step {k}: {message}")
        logger.warning("Violazione allo step %d: %s", k, message)

    for k in range(1, scenario.horizon + 1):
        a = a_at(policy.a_schedule, k, scenario.horizon)
        if k <= n0:
            b = ladder_difficulty(policy, k - 1, 0)
            y = 0
        else:
            b = float(design_difficulty(policy, previous, a, 0.0))
            y = 1
        transcript.add(Response(Item(a=a, b=b), y))

        if k <= n0:
            theta_hat = ladder_difficulty(policy, k, 0)
            bound_a13 = math.nan
            bound_ok = True
        else:
            estimate = solve_ability(transcript, EstimatingMode.TWO_PL_SCORE, k, scenario.tol)
            transcript.attach_estimate(estimate)
            theta_hat = estimate.value
            bound += 1.0 / k ** 2
            bound_a13 = bound
            bound_ok = theta_hat <= bound_a13 + slack
            if not bound_ok:
                violation(k, f"theta_hat = {theta_hat:.12g} supera il bound {bound_a13:.12g}")
            if k == n0 + 1 and theta_hat > scenario.theta0 + slack:
                violation(k, f"theta_hat = {theta_hat:.12g} supera theta0 = {scenario.theta0}")
            if k > n0 + 1 and theta_hat < previous - slack:
                violation(k, f"stima decrescente: {previous:.12g} -> {theta_hat:.12g}")

        below = theta_hat < theta - 1.0
        if not below:
            violation(k, f"theta_hat = {theta_hat:.12g} non e' sotto theta - 1 = {theta - 1.0}")

        t = a * (theta - b)
        term = float(log_expit(t) if y == 1 else log_expit(-t))
        trace.records.append(TraceRecord(k, a, b, y, theta_hat, bound_a13, bound_ok, below, term))
        logger.debug("k=%d a=%g b=%.12g y=%d theta_hat=%.12g", k, a, b, y, theta_hat)
        previous = theta_hat

    return trace


def log_prob_event_A(trace: DivergenceTrace, theta_true: float) -> float:
    """
    log P(A) fino all'orizzonte della traccia, in log-space

    sum_{k <= n0} log(1 - G(k^3 (theta - b_k))) + sum_{k > n0} log G(k^3 (theta - b_k))
    """
    frame = trace.to_frame()
    t = frame["a"].to_numpy() * (theta_true - frame["b"].to_numpy())
    y = frame["y"].to_numpy()
    return float(np.sum(np.where(y == 1, log_expit(t), log_expit(-t))))


# ===== Informazione limitata con a_j = 1/j =====

@dataclass
class BoundedInfoReport:
    n: int
    replications: int
    early_n: int
    info_bound: float
    info_limit: float
    max_info_at_estimate: float
    max_info_at_true: float
    median_error_early: float
    median_error_final: float

    @property
    def bound_holds(self) -> bool:
        ceiling = self.info_bound * (1.0 + 1e-12)
        return (self.info_bound < self.info_limit
                and self.max_info_at_estimate <= ceiling and self.max_info_at_true <= ceiling)

    @property
    def error_ratio(self) -> float:
        """median |theta_n - theta| / median |theta_early - theta|"""
        if self.median_error_early == 0.0:
            return math.inf
        return self.median_error_final / self.median_error_early


def bounded_info_demo(
    n: int,
    replications: int,
    seed: int,
    theta_true: float = 0.0,
    threads: Optional[int] = None,
) -> BoundedInfoReport:
    """
    Sessioni 2-PL con a_j = 1/j: l'informazione totale resta sotto pi^2/24

    Il bound deterministico (1/4) sum 1/j^2 viene confrontato con l'informazione
    osservata di ogni replicazione; il rapporto tra gli errori mediani a n e a n/10
    mostra che la stima non converge.
    """
    if n < 10:
        raise ConfigError(f"bounded_info_demo richiede n >= 10, trovato {n}")
    early = max(2, n // 10)
    schedule = Explicit(tuple(1.0 / j for j in range(1, n + 1)))
    config = SimulationConfig(
        theta_true=theta_true,
        model=ModelKind.TWO_PL,
        policy=DesignPolicy(a_schedule=schedule, a_bounds=(1.0 / n, 1.0)),
        n_items=n,
        replications=replications,
        master_seed=seed,
        checkpoints=(early, n) if early < n else (n,),
    )
    batch = simulate_replications(config, threads)
    first, last = batch.at(early), batch.at(n)

    report = BoundedInfoReport(
        n=n,
        replications=replications,
        early_n=early,
        info_bound=0.25 * sum(1.0 / j ** 2 for j in range(1, n + 1)),
        info_limit=math.pi ** 2 / 24.0,
        max_info_at_estimate=float(np.max(last.observed_info)),
        max_info_at_true=float(np.max(last.info_at_true)),
        median_error_early=float(np.median(np.abs(first.theta_hat - theta_true))),
        median_error_final=float(np.median(np.abs(last.theta_hat - theta_true))),
    )
    logger.info("Informazione massima %.6f (bound %.6f), rapporto errori %.3f",
                report.max_info_at_estimate, report.info_bound, report.error_ratio)
    return report


# Test del modulo
if __name__ == "__main__":
    print("\n🧪 Test counterexample\n")
    trace = divergent_trajectory(DivergenceScenario())
    print(f"n0 = {trace.n0}")
    print(f"theta_hat al passo n0: {trace.theta_at(trace.n0):.4f}")
    print(f"theta_hat finale: {trace.records[-1].theta_hat:.6f}")
    print(f"log P(A) = {log_prob_event_A(trace, 0.0):.6g}")
