"""
Simulator - Sessioni adattive simulate ed esperimenti Monte Carlo

Le replicazioni di un batch avanzano in lockstep: ogni step e' una operazione
numpy su tutte le righe (una riga = una replicazione). Ogni riga usa il proprio
stream casuale e la propria bisezione, quindi il risultato non dipende da come
le replicazioni vengono divise in chunk o distribuite sui thread.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import kstest

from cat_lab.core.errors import BankExhaustedError, CatLabError, ConfigError, ScheduleError, SimulationError
from cat_lab.core.estimator import (
    DEFAULT_TOL,
    EstimatingMode,
    Response,
    Transcript,
    bisect_decreasing,
    fallback_value,
    mode_weights,
    solvable_arrays,
    solve_ability,
    weighted_residuals,
)
from cat_lab.core.irt_core import (
    Item,
    ModelKind,
    icc,
    icc_curve,
    information_curve,
    max_info_closed_form,
)
from cat_lab.design.designer import (
    DesignPolicy,
    FiniteBank,
    IdealizedBank,
    ItemBank,
    SessionState,
    a_at,
    c_at,
    check_policy_for_model,
    design_difficulty,
    next_item,
    validate_policy,
)
from cat_lab.utils.seeding import stream_for, thread_count

logger = logging.getLogger(__name__)

DEFAULT_CHECKPOINTS = (25, 50, 100, 200, 400)
CHUNK_SIZE = 250
CSV_COLUMNS = ["n", "bias", "variance", "mse", "info_ratio", "std_err_var", "ks_stat", "fallback_count"]


@dataclass(frozen=True)
class SimulationConfig:
    """
    Parametri di un esperimento Monte Carlo

    checkpoints=None usa i checkpoint di default che non superano n_items,
    piu' n_items stesso.
    """
    theta_true: float = 0.0
    model: ModelKind = ModelKind.RASCH
    policy: DesignPolicy = field(default_factory=DesignPolicy)
    bank: ItemBank = field(default_factory=IdealizedBank)
    n_items: int = 400
    replications: int = 2000
    master_seed: int = 42
    checkpoints: Optional[Tuple[int, ...]] = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.checkpoints is None:
            resolved = [n for n in DEFAULT_CHECKPOINTS if n <= self.n_items]
            if self.n_items not in resolved:
                resolved.append(self.n_items)
            object.__setattr__(self, "checkpoints", tuple(resolved))
        else:
            object.__setattr__(self, "checkpoints", tuple(int(n) for n in self.checkpoints))
        self._validate()

    def _validate(self):
        if not math.isfinite(self.theta_true):
            raise ConfigError(f"theta_true non finito: {self.theta_true}")
        if self.replications < 1:
            raise ConfigError(f"Servono almeno 1 replicazione, trovato {self.replications}")
        if self.n_items < 2:
            raise ConfigError(f"Il test deve avere almeno 2 item, trovato {self.n_items}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError(f"master_seed deve essere un intero a 64 bit, trovato {self.master_seed}")
        if not self.tol > 0:
            raise ConfigError(f"tol deve essere > 0, trovato {self.tol}")

        points = self.checkpoints
        if not points:
            raise ConfigError("Nessun checkpoint")
        if any(later <= earlier for earlier, later in zip(points, points[1:])):
            raise ConfigError(f"Checkpoint non strettamente crescenti: {list(points)}")
        # k0 >= 2: con un solo item non esiste ancora nessuna stima
        if points[0] < 2 or points[-1] > self.n_items:
            raise ConfigError(f"Checkpoint fuori da [2, {self.n_items}]: {list(points)}")

        issues = validate_policy(self.policy)
        for issue in issues:
            if issue.severity == "warning":
                logger.warning("Policy %s: %s", issue.code, issue.message)
        errors = [issue for issue in issues if issue.severity == "error"]
        if errors:
            raise ConfigError("; ".join(issue.message for issue in errors))

        if isinstance(self.bank, FiniteBank):
            if self.n_items > len(self.bank):
                raise ConfigError(f"n_items = {self.n_items} supera la banca ({len(self.bank)} item)")
            rejected = [i for i, item in enumerate(self.bank.items) if not self.model.accepts(item)]
            if rejected:
                raise ConfigError(f"Item {rejected[:5]} incompatibili con il modello {self.model.value}")
        else:
            check_policy_for_model(self.policy, self.model)
            try:
                a_at(self.policy.a_schedule, self.n_items, self.n_items)
                c_at(self.policy.c_rule, self.n_items)
            except ScheduleError as e:
                raise ConfigError(str(e)) from e

    @property
    def mode(self) -> EstimatingMode:
        return EstimatingMode.for_model(self.model)

    def to_dict(self) -> Dict:
        """Configurazione risolta (default materializzati) per il manifest"""
        policy = asdict(self.policy)
        policy["a_schedule"] = {"kind": type(self.policy.a_schedule).__name__, **asdict(self.policy.a_schedule)}
        policy["c_rule"] = {"kind": type(self.policy.c_rule).__name__, **asdict(self.policy.c_rule)}
        policy["b_rule"] = self.policy.b_rule.value
        if isinstance(self.bank, FiniteBank):
            bank = {"kind": "finite", "items": [[it.a, it.b, it.c] for it in self.bank.items]}
        else:
            bank = {"kind": "idealized"}
        return {
            "theta_true": self.theta_true,
            "model": self.model.value,
            "policy": policy,
            "bank": bank,
            "n_items": self.n_items,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "checkpoints": list(self.checkpoints),
            "tol": self.tol,
        }


@dataclass(frozen=True)
class CheckpointRecord:
    """Stato di una replicazione a un checkpoint"""
    n: int
    theta_hat: float
    observed_info: float
    info_at_true: float
    standardized_error: float
    fallback: bool


@dataclass
class ReplicationResult:
    replication: int
    records: List[CheckpointRecord] = field(default_factory=list)

    def at(self, n: int) -> CheckpointRecord:
        for record in self.records:
            if record.n == n:
                return record
        raise KeyError(f"Checkpoint {n} assente")


@dataclass
class CheckpointArrays:
    """Valori di tutte le replicazioni di un batch a un checkpoint"""
    n: int
    theta_hat: np.ndarray
    observed_info: np.ndarray
    info_at_true: np.ndarray
    standardized_error: np.ndarray
    fallback: np.ndarray


@dataclass
class BatchResult:
    """Risultati per checkpoint, righe ordinate per indice di replicazione"""
    indices: np.ndarray
    checkpoints: List[CheckpointArrays]

    @classmethod
    def concatenate(cls, parts: Sequence["BatchResult"]) -> "BatchResult":
        parts = sorted(parts, key=lambda part: int(part.indices[0]))
        merged = []
        for position, first in enumerate(parts[0].checkpoints):
            pieces = [part.checkpoints[position] for part in parts]
            merged.append(CheckpointArrays(
                n=first.n,
                theta_hat=np.concatenate([p.theta_hat for p in pieces]),
                observed_info=np.concatenate([p.observed_info for p in pieces]),
                info_at_true=np.concatenate([p.info_at_true for p in pieces]),
                standardized_error=np.concatenate([p.standardized_error for p in pieces]),
                fallback=np.concatenate([p.fallback for p in pieces]),
            ))
        return cls(indices=np.concatenate([part.indices for part in parts]), checkpoints=merged)

    def at(self, n: int) -> CheckpointArrays:
        for arrays in self.checkpoints:
            if arrays.n == n:
                return arrays
        raise KeyError(f"Checkpoint {n} assente")

    def replication(self, index: int) -> ReplicationResult:
        row = int(np.flatnonzero(self.indices == index)[0])
        return ReplicationResult(index, [
            CheckpointRecord(
                n=arrays.n,
                theta_hat=float(arrays.theta_hat[row]),
                observed_info=float(arrays.observed_info[row]),
                info_at_true=float(arrays.info_at_true[row]),
                standardized_error=float(arrays.standardized_error[row]),
                fallback=bool(arrays.fallback[row]),
            )
            for arrays in self.checkpoints
        ])


# ===== Sessione singola =====

def draw_response(theta_true: float, item: Item, rng: np.random.Generator) -> int:
    """Risposta simulata: 1 con probabilita' icc(theta_true, item); consuma un solo uniforme"""
    return int(rng.random() < icc(theta_true, item))


def run_session(config: SimulationConfig, rng: np.random.Generator) -> Transcript:
    """
    Una sessione adattiva completa di config.n_items step

    next_item -> draw_response -> solve_ability (da k0 in poi), con fallback_index
    uguale al numero di item somministrati.
    """
    state = SessionState(test_length=config.n_items)
    mode = config.mode
    for k in range(1, config.n_items + 1):
        item = next_item(state, config.policy, config.bank)
        state.transcript.add(Response(item, draw_response(config.theta_true, item, rng)))
        if state.transcript.has_both_outcomes:
            state.transcript.attach_estimate(solve_ability(state.transcript, mode, k, config.tol))
    return state.transcript


# ===== Motore batch =====

def _locate_failure(solve_row, rows: np.ndarray) -> int:
    """Prima riga il cui solve fallisce da sola"""
    for row in rows:
        try:
            solve_row(row)
        except CatLabError:
            return int(row)
    return int(rows[0])


def _simulate_chunk(config: SimulationConfig, indices: np.ndarray) -> BatchResult:
    R = len(indices)
    n = config.n_items
    policy = config.policy
    mode = config.mode
    theta = config.theta_true
    checkpoints = set(config.checkpoints)

    uniforms = np.stack([stream_for(config.master_seed, int(i)).random(n) for i in indices])
    A = np.zeros((R, n))
    B = np.zeros((R, n))
    C = np.zeros((R, n))
    Y = np.zeros((R, n))

    theta_hat = np.zeros(R)
    estimated = np.zeros(R, dtype=bool)
    on_fallback = np.zeros(R, dtype=bool)
    flipped = np.zeros(R, dtype=bool)
    first_y = np.zeros(R)

    finite = isinstance(config.bank, FiniteBank)
    if finite:
        bank_a, bank_b, bank_c = config.bank.parameter_arrays()
        used = np.zeros((R, len(config.bank)), dtype=bool)

    records: List[CheckpointArrays] = []
    all_rows = np.arange(R)

    for j in range(n):
        k = j + 1
        # target: ladder finche' la riga non ha entrambe le risposte, poi la stima corrente
        if j == 0:
            target = np.full(R, float(policy.b1))
        else:
            direction = np.where(first_y == 1.0, 1.0, -1.0)
            ladder = policy.b1 + direction * policy.eps0 * j
            target = np.where(flipped, theta_hat, ladder)

        if finite:
            if k > len(config.bank):
                raise SimulationError(int(indices[0]), BankExhaustedError(
                    f"Banca esaurita: {len(config.bank)} item tutti gia' somministrati"))
            info = information_curve(target[:, None], bank_a, bank_b, bank_c)
            info[used] = -np.inf
            pick = np.argmax(info, axis=1)
            used[all_rows, pick] = True
            a, b, c = bank_a[pick], bank_b[pick], bank_c[pick]
        else:
            a_k = a_at(policy.a_schedule, k, n)
            c_k = c_at(policy.c_rule, k)
            a = np.full(R, a_k)
            c = np.full(R, c_k)
            b = np.where(flipped, design_difficulty(policy, theta_hat, a_k, c_k), target)

        y = (uniforms[:, j] < icc_curve(theta, a, b, c)).astype(float)
        A[:, j], B[:, j], C[:, j], Y[:, j] = a, b, c, y
        if j == 0:
            first_y = y.copy()
        flipped |= y != first_y

        rows = np.flatnonzero(flipped)
        if rows.size:
            a_r, b_r, c_r, y_r = A[rows, :k], B[rows, :k], C[rows, :k], Y[rows, :k]
            ok = solvable_arrays(a_r, c_r, y_r, mode)
            values = np.full(rows.size, fallback_value(k))
            if ok.any():
                a_s, b_s, c_s, y_s = a_r[ok], b_r[ok], c_r[ok], y_r[ok]
                w = mode_weights(mode, a_s, c_s)
                center = np.where(estimated[rows[ok]], theta_hat[rows[ok]], 0.0)
                try:
                    values[ok] = bisect_decreasing(
                        lambda th: weighted_residuals(th, a_s, b_s, c_s, y_s, w), center, config.tol)
                except CatLabError as e:
                    def solve_row(r):
                        bisect_decreasing(lambda th: weighted_residuals(th, a_s[r], b_s[r], c_s[r], y_s[r], w[r]),
                                          center[r], config.tol)
                    bad = _locate_failure(solve_row, np.arange(int(ok.sum())))
                    raise SimulationError(int(indices[rows[ok][bad]]), e) from e
            theta_hat[rows] = values
            estimated[rows] = True
            on_fallback[rows] = ~ok

        if k in checkpoints:
            # prima di k0 la stima provvisoria e' l'ultima difficolta' somministrata
            current = np.where(estimated, theta_hat, B[:, j])
            info_hat = np.sum(information_curve(current[:, None], A[:, :k], B[:, :k], C[:, :k]), axis=1)
            info_true = np.sum(information_curve(theta, A[:, :k], B[:, :k], C[:, :k]), axis=1)
            v_n = np.sum(max_info_closed_form(A[:, :k], C[:, :k]), axis=1)
            records.append(CheckpointArrays(
                n=k,
                theta_hat=current,
                observed_info=info_hat,
                info_at_true=info_true,
                standardized_error=np.sqrt(v_n) * (current - theta),
                fallback=~estimated | on_fallback,
            ))

    return BatchResult(indices=np.asarray(indices), checkpoints=records)


def _guarded_chunk(config: SimulationConfig, indices: np.ndarray) -> BatchResult:
    try:
        return _simulate_chunk(config, indices)
    except SimulationError:
        raise
    except Exception as e:
        raise SimulationError(int(indices[0]) if len(indices) == 1 else None, e) from e


def simulate_replications(config: SimulationConfig, threads: Optional[int] = None) -> BatchResult:
    """
    Esegue tutte le replicazioni e restituisce i valori per checkpoint

    Args:
        config: esperimento
        threads: numero di worker (None: CAT_LAB_THREADS, 0/assente = tutti i core)
    """
    indices = np.arange(config.replications)
    chunks = [indices[start:start + CHUNK_SIZE] for start in range(0, len(indices), CHUNK_SIZE)]
    workers = min(thread_count(threads), len(chunks))
    logger.debug("%d replicazioni in %d chunk su %d thread", len(indices), len(chunks), workers)

    run_chunk = partial(_guarded_chunk, config)
    if workers <= 1:
        parts = [run_chunk(chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, chunks))
    return BatchResult.concatenate(parts)


# ===== Aggregazione =====

def ks_statistic(samples) -> float:
    """Distanza di Kolmogorov-Smirnov tra la CDF empirica e la normale standard"""
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise ValueError("ks_statistic richiede almeno un campione")
    return float(kstest(values, "norm").statistic)


@dataclass
class SummaryTable:
    """
    Aggregati per checkpoint; to_csv scrive esattamente le colonne CSV_COLUMNS

    std_err_var_info_hat e std_err_var_info_true restano in memoria: errore standardizzato
    con l'informazione osservata in theta_hat o calcolata nel theta vero al posto di v_n.
    """
    frame: pd.DataFrame
    model: ModelKind

    @classmethod
    def from_batch(cls, batch: BatchResult, config: SimulationConfig) -> "SummaryTable":
        long = pd.concat([
            pd.DataFrame({
                "replication": batch.indices,
                "n": arrays.n,
                "estimate": arrays.theta_hat,
                "error": arrays.theta_hat - config.theta_true,
                "sq_error": (arrays.theta_hat - config.theta_true) ** 2,
                "info_ratio": 4.0 * arrays.observed_info / arrays.n,
                "std_err": arrays.standardized_error,
                "std_err_info_hat": np.sqrt(arrays.observed_info) * (arrays.theta_hat - config.theta_true),
                "std_err_info_true": np.sqrt(arrays.info_at_true) * (arrays.theta_hat - config.theta_true),
                "fallback": arrays.fallback.astype(int),
            })
            for arrays in batch.checkpoints
        ], ignore_index=True)

        frame = long.groupby("n", sort=True).agg(
            bias=("error", "mean"),
            variance=("estimate", "var"),
            mse=("sq_error", "mean"),
            info_ratio=("info_ratio", "mean"),
            std_err_var=("std_err", "var"),
            std_err_var_info_hat=("std_err_info_hat", "var"),
            std_err_var_info_true=("std_err_info_true", "var"),
            ks_stat=("std_err", ks_statistic),
            fallback_count=("fallback", "sum"),
            mean_estimate=("estimate", "mean"),
            n_replications=("estimate", "size"),
        ).reset_index()

        if config.model is not ModelKind.RASCH:
            frame["info_ratio"] = np.nan
        frame["fallback_count"] = frame["fallback_count"].astype(int)
        return cls(frame=frame, model=config.model)

    @property
    def checkpoints(self) -> List[int]:
        return [int(n) for n in self.frame["n"]]

    def row(self, n: int) -> pd.Series:
        match = self.frame[self.frame["n"] == n]
        if match.empty:
            raise KeyError(f"Checkpoint {n} assente")
        return match.iloc[0]

    def final(self) -> pd.Series:
        return self.frame.iloc[-1]

    def to_csv(self, path):
        self.frame[CSV_COLUMNS].to_csv(path, index=False, lineterminator="\n", na_rep="", float_format="%.10g")


def run_replications(config: SimulationConfig, threads: Optional[int] = None) -> SummaryTable:
    """
    Esperimento Monte Carlo completo

    Returns:
        SummaryTable deterministica in (config, master_seed)
    """
    logger.info("Simulazione %s: theta=%.3f, n=%d, R=%d, seed=%d",
                config.model.value, config.theta_true, config.n_items, config.replications, config.master_seed)
    table = SummaryTable.from_batch(simulate_replications(config, threads), config)
    final = table.final()
    if final["fallback_count"] > 0:
        logger.warning("%d replicazioni senza radice al checkpoint finale n=%d",
                       int(final["fallback_count"]), int(final["n"]))
    logger.info("Simulazione completata: MSE finale %.6g", float(final["mse"]))
    return table


# ===== Confronto ascendente / discendente =====

@dataclass
class MseComparison:
    ascending: SummaryTable
    descending: SummaryTable

    def paired_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "n": self.ascending.frame["n"],
            "mse_ascending": self.ascending.frame["mse"],
            "mse_descending": self.descending.frame["mse"],
        })

    @property
    def ascending_wins(self) -> bool:
        """True se al checkpoint finale l'MSE ascendente e' minore"""
        return float(self.ascending.final()["mse"]) < float(self.descending.final()["mse"])


def mse_compare(
    ascending_config: SimulationConfig,
    descending_config: SimulationConfig,
    threads: Optional[int] = None,
) -> MseComparison:
    """
    MSE per checkpoint di due disegni che differiscono solo nello schedule di a

    Stessi master_seed e indici: le due simulazioni usano gli stessi numeri casuali.
    """
    if ascending_config.checkpoints != descending_config.checkpoints:
        raise ConfigError(
            f"Checkpoint diversi: {list(ascending_config.checkpoints)} vs {list(descending_config.checkpoints)}")
    aligned = replace(ascending_config,
                      policy=replace(ascending_config.policy, a_schedule=descending_config.policy.a_schedule))
    if aligned != descending_config:
        raise ConfigError("Le configurazioni devono differire solo nello schedule di a")

    return MseComparison(
        ascending=run_replications(ascending_config, threads),
        descending=run_replications(descending_config, threads),
    )
