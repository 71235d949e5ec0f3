"""
Seeding - Stream casuali riproducibili e parallelismo
"""

import os
from typing import Optional

import numpy as np

THREADS_ENV = "CAT_LAB_THREADS"


def stream_for(master_seed: int, index: int) -> np.random.Generator:
    """
    Generatore PCG64 della replicazione `index`

    Lo stream dipende solo da (master_seed, index): una replicazione produce la stessa
    sequenza sia eseguita da sola sia dentro un batch.
    """
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(sequence))


def thread_count(requested: Optional[int] = None) -> int:
    """
    Numero di worker da usare

    Args:
        requested: valore esplicito; se None si legge CAT_LAB_THREADS (0 o assente = tutti i core)
    """
    if requested is None:
        raw = os.getenv(THREADS_ENV, "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError:
            requested = 0
    if requested <= 0:
        return os.cpu_count() or 1
    return requested
