"""
Lab Orchestrator - Esegue un comando del laboratorio e produce il report finale
Mappa gli errori sugli exit code: 2 uso/config, 3 dati di input, 1 tutto il resto
"""

import sys
import time
import traceback
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from cat_lab.cli.commands import EXIT_INPUT, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, LabCommands
from cat_lab.core.errors import BankFormatError, CatLabError, ConfigError, PreconditionError

__all__ = ["EXIT_OK", "EXIT_RUNTIME", "EXIT_USAGE", "EXIT_INPUT", "LabOrchestrator", "RunStats", "exit_code_for"]


def exit_code_for(error: BaseException) -> int:
    """Exit code associato a un'eccezione"""
    if isinstance(error, (BankFormatError, FileNotFoundError)):
        return EXIT_INPUT
    if isinstance(error, (ConfigError, PreconditionError)):
        return EXIT_USAGE
    return EXIT_RUNTIME


@dataclass
class RunStats:
    """Statistiche esecuzione comando"""
    command: str
    start_time: float = field(default_factory=time.time)
    artifacts: List[str] = field(default_factory=list)

    def elapsed_time(self) -> float:
        return time.time() - self.start_time


class LabOrchestrator:
    """Esegue un comando tramite LabCommands, con report verbose opzionale"""

    def __init__(self, commands: Optional[LabCommands] = None, verbose: bool = False):
        """
        Args:
            commands: esecutore dei comandi (default LabCommands())
            verbose: stampa banner e report finale
        """
        self.commands = commands or LabCommands()
        self.verbose = verbose

    def _print(self, message: str):
        """Print se verbose e' attivo"""
        if self.verbose:
            print(message)

    def run(self, command: str, options: Dict[str, Any]) -> Dict[str, Any]:
        """
        Esegue il comando

        Returns:
            Dict con success, exit_code, result / error e stats
        """
        stats = RunStats(command)
        self._print(f"\n{'=' * 60}")
        self._print(f"🚀 cat-lab {command}")
        self._print(f"{'=' * 60}")
        for key in sorted(options):
            self._print(f"   • {key}: {options[key]}")

        try:
            outcome = self.commands.execute(command, options)
        except (CatLabError, FileNotFoundError) as e:
            print(f"❌ {e}", file=sys.stderr)
            outcome = {"success": False, "error": str(e), "exit_code": exit_code_for(e)}
        except KeyboardInterrupt:
            self._print("\n⚠️ Esecuzione interrotta dall'utente (Ctrl+C)")
            outcome = {"success": False, "error": "interrotto", "exit_code": EXIT_RUNTIME}
        except Exception as e:
            print(f"❌ Errore inatteso: {e}", file=sys.stderr)
            if self.verbose:
                traceback.print_exc()
            outcome = {"success": False, "error": str(e), "exit_code": EXIT_RUNTIME}

        result = outcome.get("result") or {}
        stats.artifacts = list(result.get("artifacts", []))

        self._print(f"\n{'=' * 60}")
        self._print("📊 Report Finale")
        self._print(f"{'=' * 60}")
        self._print(f"⏱️  Tempo totale: {stats.elapsed_time():.1f}s")
        self._print(f"📁 Artefatti: {len(stats.artifacts)}")
        for path in stats.artifacts:
            self._print(f"   • {path}")
        self._print(f"{'✅ Completato' if outcome['success'] else '❌ Fallito'} (exit {outcome['exit_code']})")
        self._print(f"{'=' * 60}\n")

        return {
            **outcome,
            "stats": {
                "command": stats.command,
                "elapsed_time": stats.elapsed_time(),
                "artifacts": stats.artifacts,
            },
        }
