"""
Errori del laboratorio CAT
Ogni errore del pacchetto deriva da CatLabError, cosi' la CLI puo' mapparli sugli exit code
"""

from typing import Optional


class CatLabError(Exception):
    """Radice di tutti gli errori del pacchetto"""
    pass


class InvalidItemError(CatLabError, ValueError):
    """Parametri dell'item fuori dominio (a <= 0, c fuori da [0, 1), b non finito)"""
    pass


class ModeMismatchError(CatLabError, ValueError):
    """Modalita' di stima incompatibile con gli item del transcript"""
    pass


class NonMonotoneModeError(CatLabError, ValueError):
    """Operazione che richiede un'equazione monotona chiamata con ThreePLRaw"""
    pass


class InitializationIncompleteError(CatLabError):
    """Il transcript non contiene ancora entrambe le risposte (0 e 1)"""
    pass


class DegenerateTranscriptError(CatLabError):
    """Nessun cambio di segno trovato entro |theta| = 1e6"""
    pass


class ScheduleError(CatLabError, ValueError):
    """Indice di step non valido per lo schedule dei parametri a / c"""
    pass


class BankExhaustedError(CatLabError):
    """Tutti gli item della banca finita sono gia' stati somministrati"""
    pass


class ConfigError(CatLabError, ValueError):
    """Configurazione di policy / simulazione non valida"""
    pass


class PreconditionError(CatLabError, ValueError):
    """Precondizione dell'esempio di inconsistenza non soddisfatta"""
    pass


class BankFormatError(CatLabError):
    """Riga non valida nel file della banca item"""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"riga {line}: {message}")


class BoundViolationError(CatLabError):
    """Un bound della traiettoria divergente e' stato violato"""

    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")


class SimulationError(CatLabError):
    """Errore durante una replicazione Monte Carlo"""

    def __init__(self, replication: Optional[int], cause: Exception):
        self.replication = replication
        self.cause = cause
        where = f"replicazione {replication}" if replication is not None else "batch di replicazioni"
        super().__init__(f"{where}: {cause}")
