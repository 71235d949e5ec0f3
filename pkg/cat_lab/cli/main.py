"""
CLI del laboratorio CAT

Ogni sotto-comando parte dai propri default, poi applica il file --config (JSON
con chiavi uguali alle destinazioni dei flag) e infine i flag espliciti.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from cat_lab import __version__
from cat_lab.cli.commands import EXIT_USAGE, LabCommands
from cat_lab.cli.orchestrator import LabOrchestrator

logger = logging.getLogger(__name__)

VERBOSE_ENV = "CAT_LAB_VERBOSE"

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "simulate": {
        "model": "rasch",
        "theta_true": 0.0,
        "n_items": 400,
        "replications": 2000,
        "seed": 42,
        "checkpoints": None,
        "a_schedule": "const:1.0",
        "a_min": 0.5,
        "a_max": 2.0,
        "c": 0.0,
        "delta0": 0.5,
        "b_rule": "offset",
        "b1": 0.0,
        "eps0": 1.0,
        "bank": None,
        "out": "out",
        "svg": False,
    },
    "diverge": {
        "theta_true": 0.0,
        "theta0": -2.7,
        "eps0": 1.0,
        "n0": None,
        "horizon": 200,
        "out": "out",
    },
    "mse-compare": {
        "model": "2pl",
        "theta_true": 0.0,
        "lo": 0.5,
        "hi": 2.0,
        "n_items": 30,
        "replications": 5000,
        "seed": 42,
        "checkpoints": None,
        "c": 0.0,
        "delta0": 0.5,
        "b_rule": "offset",
        "b1": 0.0,
        "eps0": 1.0,
        "out": "out",
        "svg": False,
    },
    "bounded-info": {
        "theta_true": 0.0,
        "n_items": 2000,
        "replications": 1000,
        "seed": 42,
        "out": "out",
    },
    "bank-inspect": {},
}


class UsageError(Exception):
    """Flag o file --config non validi"""
    pass


def _add_design_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--model", choices=["rasch", "2pl", "3pl"], help="modello logistico")
    parser.add_argument("--theta", dest="theta_true", type=float, help="abilita' vera dell'esaminato simulato")
    parser.add_argument("--n-items", dest="n_items", type=int, help="lunghezza del test")
    parser.add_argument("--replications", type=int, help="numero di replicazioni Monte Carlo")
    parser.add_argument("--seed", type=int, help="master seed a 64 bit")
    parser.add_argument("--checkpoints", help="lista di lunghezze, es. 25,50,100")
    parser.add_argument("--c", type=float, help="guessing costante (0 = nessun guessing)")
    parser.add_argument("--delta0", type=float, help="tetto del guessing: c <= 1 - delta0")
    parser.add_argument("--b-rule", dest="b_rule", choices=["plain", "offset"], help="regola sulla difficolta'")
    parser.add_argument("--b1", type=float, help="difficolta' del primo item")
    parser.add_argument("--eps0", type=float, help="passo della ladder iniziale")
    parser.add_argument("--svg", action="store_true", help="scrive anche il grafico SVG dell'MSE")


def build_parser() -> argparse.ArgumentParser:
    """Parser con sotto-comandi; i flag non passati restano assenti dal namespace"""
    parser = argparse.ArgumentParser(prog="cat-lab", description="Laboratorio di test adattivi IRT")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", help="log DEBUG e report dettagliato")
    parser.add_argument("--threads", type=int, default=None, help="worker (0 = tutti i core)")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="file JSON con le opzioni del comando")
        p.add_argument("--out", help="directory di output")
        return p

    simulate = command("simulate", "esperimento Monte Carlo")
    _add_design_flags(simulate)
    simulate.add_argument("--a-schedule", dest="a_schedule",
                          help="const:A | asc:LO:HI | desc:HI:LO | strat:L1,L2:BLOCK | explicit:A1,A2 | cubic")
    simulate.add_argument("--a-min", dest="a_min", type=float, help="bound inferiore m di a")
    simulate.add_argument("--a-max", dest="a_max", type=float, help="bound superiore M di a")
    simulate.add_argument("--bank", help="banca finita CSV/XLSX con colonne a,b,c")

    diverge = command("diverge", "traiettoria divergente con a_k = k^3")
    diverge.add_argument("--theta", dest="theta_true", type=float)
    diverge.add_argument("--theta0", type=float, help="valore iniziale della stima")
    diverge.add_argument("--eps0", type=float, help="passo della ladder iniziale")
    diverge.add_argument("--n0", type=int, help="n0 esplicito (default: il minimo valido)")
    diverge.add_argument("--horizon", type=int, help="numero di step della traccia")

    compare = command("mse-compare", "MSE con a ascendente vs discendente")
    _add_design_flags(compare)
    compare.add_argument("--lo", type=float, help="a minimo")
    compare.add_argument("--hi", type=float, help="a massimo")

    bounded = command("bounded-info", "sessioni 2-PL con a_j = 1/j")
    bounded.add_argument("--theta", dest="theta_true", type=float)
    bounded.add_argument("--n-items", dest="n_items", type=int)
    bounded.add_argument("--replications", type=int)
    bounded.add_argument("--seed", type=int)

    bank = sub.add_parser("bank", help="strumenti per le banche di item")
    bank_sub = bank.add_subparsers(dest="bank_command", required=True)
    inspect = bank_sub.add_parser("inspect", help="valida e riassume una banca")
    inspect.add_argument("path")

    return parser


def resolve_options(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Default del comando <- file --config <- flag espliciti

    Raises:
        UsageError: file illeggibile o chiavi sconosciute
    """
    command = "bank-inspect" if args.command == "bank" else args.command
    options = dict(DEFAULTS[command])
    explicit = {k: v for k, v in vars(args).items()
                if k not in ("command", "bank_command", "verbose", "threads", "config")}

    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                from_file = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"File di configurazione non leggibile: {e}")
        if not isinstance(from_file, dict):
            raise UsageError("Il file di configurazione deve contenere un oggetto JSON")
        unknown = sorted(set(from_file) - set(options))
        if unknown:
            raise UsageError(f"Chiavi sconosciute nel file di configurazione: {', '.join(unknown)}")
        options.update(from_file)

    options.update(explicit)
    return options


def setup_logging(verbose: bool):
    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("cat_lab").setLevel(logging.DEBUG if verbose else logging.WARNING)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point della CLI; restituisce l'exit code"""
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    verbose = args.verbose or os.getenv(VERBOSE_ENV, "").strip().lower() in ("1", "true", "yes")
    setup_logging(verbose)

    try:
        options = resolve_options(args)
    except UsageError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE

    command = "bank-inspect" if args.command == "bank" else args.command
    orchestrator = LabOrchestrator(LabCommands(threads=args.threads), verbose=verbose)
    return orchestrator.run(command, options)["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
