"""
Lab Commands - Comandi del laboratorio CAT
Ogni comando costruisce la configurazione, esegue l'esperimento e scrive gli artefatti
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from cat_lab import __version__
from cat_lab.core.errors import ConfigError
from cat_lab.core.irt_core import ModelKind
from cat_lab.design.designer import (
    ASchedule,
    Constant,
    ConstantGuessing,
    CubicDivergent,
    DesignPolicy,
    DifficultyRule,
    Explicit,
    IdealizedBank,
    LinearAscending,
    LinearDescending,
    NoGuessing,
    Stratified,
)
from cat_lab.experiments.counterexample import (
    DivergenceScenario,
    bounded_info_demo,
    divergent_trajectory,
    log_prob_event_A,
)
from cat_lab.experiments.simulator import SimulationConfig, SummaryTable, mse_compare, run_replications
from cat_lab.tools.bank_analyzer import BankAnalyzer
from cat_lab.tools.bank_reader import BankReader, load_bank
from cat_lab.utils.svg import line_chart, write_svg

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_INPUT = 3


# ===== Parsing delle opzioni =====

def _floats(text: str, what: str) -> Tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"{what}: valori non numerici in {text!r}")
    if not values:
        raise ConfigError(f"{what}: lista vuota")
    return values


def parse_schedule(text: str) -> ASchedule:
    """
    Converte la stringa dello schedule di a

    Formati: const:A, asc:LO:HI, desc:HI:LO, strat:L1,L2,...:BLOCK, explicit:A1,A2,..., cubic
    """
    kind, _, rest = text.strip().partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "cubic" and not parts:
            return CubicDivergent()
        if kind == "const" and len(parts) == 1:
            return Constant(float(parts[0]))
        if kind == "asc" and len(parts) == 2:
            return LinearAscending(float(parts[0]), float(parts[1]))
        if kind == "desc" and len(parts) == 2:
            return LinearDescending(float(parts[0]), float(parts[1]))
        if kind == "strat" and len(parts) == 2:
            levels = _floats(parts[0], "strat")
            if list(levels) != sorted(levels):
                raise ConfigError(f"strat: i livelli devono essere crescenti, trovato {list(levels)}")
            return Stratified(levels, int(parts[1]))
        if kind == "explicit" and len(parts) == 1:
            return Explicit(_floats(parts[0], "explicit"))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Schedule non valido {text!r}: {e}")
    raise ConfigError(
        f"Schedule non valido {text!r} (attesi const:A, asc:LO:HI, desc:HI:LO, strat:L1,L2:BLOCK, explicit:A1,A2, cubic)")


def parse_checkpoints(value) -> Optional[Tuple[int, ...]]:
    """None, lista JSON o stringa "25,50,100" """
    if value is None:
        return None
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    try:
        return tuple(int(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"Checkpoint non validi: {value!r}")


def _float_option(options: Dict[str, Any], key: str) -> float:
    value = options[key]
    if isinstance(value, bool):
        raise ConfigError(f"{key} deve essere un numero, trovato {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} deve essere un numero, trovato {value!r}")


def _int_option(options: Dict[str, Any], key: str) -> int:
    value = options[key]
    number = _float_option(options, key)
    if not number.is_integer() or (isinstance(value, str) and not value.strip().lstrip("+-").isdigit()):
        raise ConfigError(f"{key} deve essere un intero, trovato {value!r}")
    return int(value) if isinstance(value, (int, str)) else int(number)


def _model(name: str) -> ModelKind:
    try:
        return ModelKind.from_name(name)
    except ValueError as e:
        raise ConfigError(str(e))


def _guessing(c: float):
    return NoGuessing() if c == 0 else ConstantGuessing(c)


def build_policy(options: Dict[str, Any], schedule: ASchedule, a_bounds: Tuple[float, float]) -> DesignPolicy:
    try:
        b_rule = DifficultyRule(options["b_rule"])
    except ValueError:
        raise ConfigError(f"b_rule non valida: {options['b_rule']!r} (attese: plain, offset)")
    return DesignPolicy(
        b1=_float_option(options, "b1"),
        eps0=_float_option(options, "eps0"),
        a_schedule=schedule,
        a_bounds=a_bounds,
        c_rule=_guessing(_float_option(options, "c")),
        delta0=_float_option(options, "delta0"),
        b_rule=b_rule,
    )


def build_simulation_config(options: Dict[str, Any]) -> SimulationConfig:
    """SimulationConfig dalle opzioni risolte del comando simulate"""
    schedule = parse_schedule(options["a_schedule"])
    bank = load_bank(options["bank"]) if options.get("bank") else IdealizedBank()
    return SimulationConfig(
        theta_true=_float_option(options, "theta_true"),
        model=_model(options["model"]),
        policy=build_policy(options, schedule,
                            (_float_option(options, "a_min"), _float_option(options, "a_max"))),
        bank=bank,
        n_items=_int_option(options, "n_items"),
        replications=_int_option(options, "replications"),
        master_seed=_int_option(options, "seed"),
        checkpoints=parse_checkpoints(options.get("checkpoints")),
    )


def build_comparison_configs(options: Dict[str, Any]) -> Tuple[SimulationConfig, SimulationConfig]:
    """Coppia ascendente / discendente del comando mse-compare"""
    lo, hi = _float_option(options, "lo"), _float_option(options, "hi")
    if not 0 < lo <= hi:
        raise ConfigError(f"Serve 0 < lo <= hi, trovato lo={lo}, hi={hi}")
    configs = []
    for schedule in (LinearAscending(lo, hi), LinearDescending(hi, lo)):
        configs.append(SimulationConfig(
            theta_true=_float_option(options, "theta_true"),
            model=_model(options["model"]),
            policy=build_policy(options, schedule, (lo, hi)),
            n_items=_int_option(options, "n_items"),
            replications=_int_option(options, "replications"),
            master_seed=_int_option(options, "seed"),
            checkpoints=parse_checkpoints(options.get("checkpoints")),
        ))
    return configs[0], configs[1]


def _json_ready(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {key: _json_ready(v) for key, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    return value


class LabCommands:
    """Esecutore dei comandi della CLI"""

    def __init__(self, threads: Optional[int] = None):
        """
        Args:
            threads: worker per le simulazioni (None = CAT_LAB_THREADS)
        """
        self.threads = threads

    def execute(self, command: str, options: Dict[str, Any]) -> Dict[str, Any]:
        """
        Esegue un comando

        Args:
            command: simulate, diverge, mse-compare, bounded-info, bank-inspect
            options: opzioni risolte (default + file --config + flag)

        Returns:
            Dict con success, exit_code e result (artefatti e valori chiave)
        """
        command_methods: Dict[str, Callable[[Dict[str, Any]], Tuple[int, Dict[str, Any]]]] = {
            "simulate": self._simulate,
            "diverge": self._diverge,
            "mse-compare": self._mse_compare,
            "bounded-info": self._bounded_info,
            "bank-inspect": self._bank_inspect,
        }
        if command not in command_methods:
            raise ConfigError(f"Comando '{command}' non trovato")

        exit_code, result = command_methods[command](options)
        return {"success": exit_code == EXIT_OK, "exit_code": exit_code, "result": result}

    # ----- helper -----

    @staticmethod
    def _out_dir(options: Dict[str, Any]) -> Path:
        out = Path(options["out"])
        out.mkdir(parents=True, exist_ok=True)
        return out

    @staticmethod
    def _write_manifest(out: Path, command: str, config: Dict, seed: Optional[int],
                        options: Dict[str, Any], artifacts: List[str]) -> str:
        path = out / "manifest.json"
        manifest = {
            "command": command,
            "config": config,
            "options": {k: v for k, v in options.items() if k not in ("out", "config", "threads", "verbose")},
            "seed": seed,
            "version": __version__,
            "artifacts": [Path(a).name for a in artifacts],
        }
        path.write_text(json.dumps(_json_ready(manifest), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8", newline="\n")
        return str(path)

    @staticmethod
    def _mse_series(table: SummaryTable) -> Tuple[List[float], List[float]]:
        return [float(n) for n in table.frame["n"]], [float(m) for m in table.frame["mse"]]

    # ----- comandi -----

    def _simulate(self, options: Dict[str, Any]) -> Tuple[int, Dict[str, Any]]:
        config = build_simulation_config(options)
        out = self._out_dir(options)
        table = run_replications(config, self.threads)

        artifacts = []
        summary_path = out / "summary.csv"
        table.to_csv(summary_path)
        artifacts.append(str(summary_path))
        if options.get("svg"):
            document = line_chart({"MSE": self._mse_series(table)},
                                  f"MSE per checkpoint ({config.model.value})", "n", "MSE")
            artifacts.append(write_svg(out / "mse.svg", document))
        artifacts.append(self._write_manifest(out, "simulate", config.to_dict(), config.master_seed,
                                              options, artifacts))

        final = table.final()
        print(f"n = {int(final['n'])}: bias = {final['bias']:.6g}, variance = {final['variance']:.6g}, "
              f"mse = {final['mse']:.6g}, std_err_var = {final['std_err_var']:.6g}, "
              f"ks = {final['ks_stat']:.4f}, fallback = {int(final['fallback_count'])}")
        return EXIT_OK, {"artifacts": artifacts, "summary": table.frame.to_dict(orient="records")}

    def _diverge(self, options: Dict[str, Any]) -> Tuple[int, Dict[str, Any]]:
        n0 = options.get("n0")
        scenario = DivergenceScenario(
            theta_true=_float_option(options, "theta_true"),
            theta0=_float_option(options, "theta0"),
            eps0=_float_option(options, "eps0"),
            n0=_int_option(options, "n0") if n0 is not None else None,
            horizon=_int_option(options, "horizon"),
        )
        out = self._out_dir(options)
        trace = divergent_trajectory(scenario, strict=False)
        log_p = log_prob_event_A(trace, scenario.theta_true)

        trace_path = out / "trace.csv"
        trace.to_csv(trace_path)
        artifacts = [str(trace_path)]
        config = {
            "theta_true": scenario.theta_true,
            "theta0": scenario.theta0,
            "eps0": scenario.eps0,
            "n0": scenario.n0,
            "horizon": scenario.horizon,
            "tol": scenario.tol,
        }
        artifacts.append(self._write_manifest(out, "diverge", config, None, options, artifacts))

        print(f"n0 = {scenario.n0}")
        print(f"log P(A) = {log_p:.10g}")
        for violation in trace.violations:
            print(f"❌ {violation}")
        exit_code = EXIT_OK if trace.passed else EXIT_RUNTIME
        return exit_code, {"artifacts": artifacts, "n0": scenario.n0, "log_prob": log_p,
                           "violations": list(trace.violations)}

    def _mse_compare(self, options: Dict[str, Any]) -> Tuple[int, Dict[str, Any]]:
        ascending, descending = build_comparison_configs(options)
        out = self._out_dir(options)
        comparison = mse_compare(ascending, descending, self.threads)

        artifacts = []
        for name, table in (("mse_ascending.csv", comparison.ascending),
                            ("mse_descending.csv", comparison.descending)):
            table.to_csv(out / name)
            artifacts.append(str(out / name))
        if options.get("svg"):
            document = line_chart(
                {"a ascendente": self._mse_series(comparison.ascending),
                 "a discendente": self._mse_series(comparison.descending)},
                "MSE: a ascendente vs discendente", "n", "MSE")
            artifacts.append(write_svg(out / "mse_compare.svg", document))
        config = {"ascending": ascending.to_dict(), "descending": descending.to_dict()}
        artifacts.append(self._write_manifest(out, "mse-compare", config, ascending.master_seed,
                                              options, artifacts))

        final_asc = float(comparison.ascending.final()["mse"])
        final_desc = float(comparison.descending.final()["mse"])
        print(f"MSE finale: ascendente = {final_asc:.6g}, discendente = {final_desc:.6g}")
        return EXIT_OK, {"artifacts": artifacts, "ascending_wins": comparison.ascending_wins}

    def _bounded_info(self, options: Dict[str, Any]) -> Tuple[int, Dict[str, Any]]:
        report = bounded_info_demo(_int_option(options, "n_items"), _int_option(options, "replications"),
                                   _int_option(options, "seed"), _float_option(options, "theta_true"), self.threads)
        out = self._out_dir(options)
        report_path = out / "bounded_info.json"
        values = {**vars(report), "bound_holds": report.bound_holds, "error_ratio": report.error_ratio}
        report_path.write_text(json.dumps(_json_ready(values), indent=2, sort_keys=True) + "\n",
                               encoding="utf-8", newline="\n")
        artifacts = [str(report_path)]
        artifacts.append(self._write_manifest(out, "bounded-info", dict(options), _int_option(options, "seed"),
                                              options, artifacts))

        print(f"Informazione massima = {report.max_info_at_estimate:.6f} (bound {report.info_bound:.6f} "
              f"< pi^2/24 = {report.info_limit:.6f})")
        print(f"Rapporto errori mediani n={report.n} / n={report.early_n}: {report.error_ratio:.4f}")
        return (EXIT_OK if report.bound_holds else EXIT_RUNTIME), {"artifacts": artifacts, **values}

    def _bank_inspect(self, options: Dict[str, Any]) -> Tuple[int, Dict[str, Any]]:
        reader = BankReader()
        frame, path = reader.read_bank_table(options["path"])
        items, issues = reader.parse_items(frame)
        analysis = BankAnalyzer.analyze(items, issues, path)
        print(BankAnalyzer.format_for_console(analysis))
        return (EXIT_OK if analysis.valid else EXIT_INPUT), {
            "artifacts": [],
            "count": analysis.count,
            "issues": [str(issue) for issue in analysis.issues],
        }
