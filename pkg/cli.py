# cli.py - Command-line front end: run, sweep, verify, list
"""
Usage:
    python cli.py run --scenario bell --format json
    python cli.py run --config my_scenario.json
    python cli.py sweep --config eps_sweep.yaml --format csv --output eps.csv
    python cli.py verify --only diamond --dims 3
    python cli.py list

Exit codes: 0 pass, 1 usage or input error, 2 scientific check failure.
"""
import argparse
import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
import yaml
from joblib import Parallel, delayed
from loguru import logger
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from config import get_config, overridden
from qops_core import QopsError, ScenarioError
from scenarios import (
    SWEEP_FAMILIES,
    check_expectations,
    evaluate,
    get_named_scenario,
    list_scenarios,
    load_scenario_file,
    sweep_member,
)
from verification import VerificationSuite, available_checks
from witness_engine import WitnessReport

EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2

# Header registry: every CSV column the tool can emit
CSV_COLUMNS: Dict[str, str] = {
    "scenario": "scenario name",
    "parameter": "swept parameter name",
    "value": "swept parameter value",
    "p1": "P^I, no interruption",
    "p2": "P^II, dynamical classicalisation",
    "p3": "P^III, environment reset",
    "p4": "P^IV, piecewise classicalisation",
    "w_a": "P^I - P^II",
    "w_b": "P^I - P^IV",
    "w_c": "P^III - P^IV",
    "w_isolated": "isolated witness of rho_S(tau) with the effective measurement",
    "r_monotone": "||rho_S(tau) - Gamma(rho_S(tau))||_tr",
    "dimension_bound": "certified lower bound on the system dimension",
    "coherence_term_a": "W^a coherence contribution",
    "correlation_term_a": "W^a correlation contribution",
    "chi_term_b": "W^b propagated-correlation contribution",
    "coherence_term_b": "W^b coherence contribution",
    "map_mismatch_b": "W^b measurement-map mismatch contribution",
    "chi_norm": "||chi_SE(tau)||_tr",
    "iq_distance": "distance of rho_SE(tau) from the incoherent-quantum set",
    "env_displacement": "||rho_E(tau) - env0||_tr",
    "ppt": "1 when the partial transpose is positive (state-level cases)",
    "thm4_slack": "R >= 2|W^a| - 2||chi|| slack",
    "wb_slack": "W^b bound slack",
    "prop1_slack": "measurement-map distance bound slack",
    "check": "verification check name",
    "passed": "1 when the check passed",
    "slack": "smallest tolerance minus error over the check's cases",
    "cases": "number of cases the check evaluated",
}

SWEEP_PARAMETERS = {"epsilon-mixture": "eps", "maximally-coherent": "d", "random": "index"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


class RunConfig(BaseModel):
    command: Literal["run", "sweep", "verify", "list"]
    scenario: Optional[str] = None
    config_path: Optional[str] = None
    seed: int = 0
    output: Optional[str] = None
    format: Literal["json", "csv"] = "json"
    tolerances: Dict[str, float] = {}
    only: List[str] = []
    dims: List[int] = []

    @field_validator("scenario")
    @classmethod
    def known_scenario(cls, name: Optional[str]) -> Optional[str]:
        if name is not None and name not in list_scenarios():
            raise ValueError(f"unknown scenario {name!r}")
        return name

    @model_validator(mode="after")
    def run_needs_source(self) -> "RunConfig":
        if self.command == "run" and (self.scenario is None) == (self.config_path is None):
            raise ValueError("run needs exactly one of --scenario or --config")
        if self.command == "sweep" and self.config_path is None:
            raise ValueError("sweep needs --config pointing at a sweep document")
        return self


class SweepSpec(BaseModel):
    family: str
    parameter: Optional[str] = None
    start: float
    stop: float
    steps: int
    dims: List[int] = [2, 2]

    @model_validator(mode="after")
    def valid_range(self) -> "SweepSpec":
        if self.family not in SWEEP_FAMILIES:
            raise ValueError(f"unknown sweep family {self.family!r}")
        expected = SWEEP_PARAMETERS[self.family]
        if self.parameter is not None and self.parameter != expected:
            raise ValueError(f"family {self.family} sweeps {expected!r}, not {self.parameter!r}")
        if self.steps < 1 or self.stop < self.start:
            raise ValueError(f"empty sweep range [{self.start}, {self.stop}] with {self.steps} steps")
        if len(self.dims) != 2:
            raise ValueError("dims must be [dim_s, dim_e]")
        return self

    def values(self) -> List[float]:
        return [float(v) for v in np.linspace(self.start, self.stop, self.steps)]


def configure_logging(level: str) -> None:
    """Logs go to stderr only; stdout carries reports"""
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format="{time:HH:mm:ss} | {level: <8} | {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", default=None)
    common.add_argument("--tolerance", action="append", default=[], metavar="NAME=VALUE")
    common.add_argument("--config", dest="config_path", default=None)
    common.add_argument("--log-level", default=None)

    parser = _Parser(prog="nsit", description="NSIT coherence-witness laboratory")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", parents=[common], help="evaluate one scenario")
    run.add_argument("--scenario", default=None)
    sub.add_parser("sweep", parents=[common], help="evaluate a parameter family")
    verify = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    verify.add_argument("--only", action="append", default=[])
    verify.add_argument("--dims", default=None, help="comma-separated dimensions")
    sub.add_parser("list", parents=[common], help="list scenarios, sweep families and checks")
    return parser


def _parse_tolerances(items: Sequence[str]) -> Dict[str, float]:
    allowed = {name.lower() for name in get_config().TOLERANCE_NAMES}
    overrides = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or name.lower() not in allowed:
            raise UsageError(f"--tolerance expects one of {sorted(allowed)} as NAME=VALUE, got {item!r}")
        overrides[name.lower()] = float(value)
    return overrides


def parse_run_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    only = [name for entry in getattr(args, "only", []) for name in entry.split(",") if name]
    dims_text = getattr(args, "dims", None)
    if args.log_level:
        configure_logging(args.log_level)
    return RunConfig(
        command=args.command,
        scenario=getattr(args, "scenario", None),
        config_path=args.config_path,
        seed=get_config().DEFAULT_SEED if args.seed is None else args.seed,
        output=args.output,
        format=args.format,
        tolerances=_parse_tolerances(args.tolerance),
        only=only,
        dims=[int(d) for d in dims_text.split(",")] if dims_text else [],
    )


# === Rows ===

def flatten(result: Any) -> Dict[str, Any]:
    """One CSV row from a WitnessReport or a state-level quantity dictionary"""
    if isinstance(result, WitnessReport):
        row = {k: v for k, v in result.model_dump().items() if k in CSV_COLUMNS}
        row.update(result.decomposition)
        row.update(result.diagnostics)
        row.update({f"{name}_slack": bound.slack for name, bound in result.bounds.items()})
        return row
    return {k: v for k, v in result.items() if k in CSV_COLUMNS}


def _table(rows: List[Dict[str, Any]]) -> str:
    present = {key for row in rows for key in row}
    columns = [c for c in CSV_COLUMNS if c in present]
    buffer = io.StringIO()
    pd.DataFrame(rows, columns=columns).to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
        logger.info(f"📂 Report written to {output}")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


# === Commands ===

def cmd_run(cfg: RunConfig) -> int:
    named = get_named_scenario(cfg.scenario) if cfg.scenario else load_scenario_file(cfg.config_path)
    search = get_config().get_search_config(seed=cfg.seed)
    result = evaluate(named, search)
    outcomes = check_expectations(named, result=result)
    failed = [o for o in outcomes if not o.passed]

    if cfg.format == "csv":
        text = _table([{"scenario": named.name, **flatten(result)}])
    else:
        body = result.model_dump() if isinstance(result, WitnessReport) else dict(result)
        body.setdefault("schema_version", get_config().SCHEMA_VERSION)
        body["scenario"] = named.name
        body["expectations"] = [
            {"quantity": o.quantity, "expected": o.expected, "measured": o.measured,
             "tolerance": o.tolerance, "passed": o.passed, "provenance": o.provenance}
            for o in outcomes
        ]
        text = json.dumps(body, sort_keys=True, indent=2)
    _emit(text, cfg.output)

    if failed:
        logger.error(f"❌ {len(failed)} expectation(s) failed for {named.name}")
        return EXIT_CHECK
    logger.info(f"✅ {named.name}: {len(outcomes)} expectation(s) hold")
    return EXIT_OK


def load_sweep_spec(path: str) -> SweepSpec:
    text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text) if Path(path).suffix.lower() in (".yaml", ".yml") else json.loads(text)
    if not isinstance(data, dict):
        raise ScenarioError("sweep document must be a mapping")
    return SweepSpec(**data)


def _sweep_row(spec: SweepSpec, value: float, seed: int) -> Dict[str, Any]:
    named = sweep_member(spec.family, value, tuple(spec.dims), seed)
    search = get_config().get_search_config(seed=seed)
    parameter = SWEEP_PARAMETERS[spec.family]
    shown = int(round(value)) if parameter in ("d", "index") else value
    return {"scenario": named.name, "parameter": parameter, "value": shown, **flatten(evaluate(named, search))}


def cmd_sweep(cfg: RunConfig) -> int:
    spec = load_sweep_spec(cfg.config_path)
    values = spec.values()
    logger.info(f"📊 Sweeping {spec.family} over {len(values)} value(s)")
    rows = Parallel(n_jobs=get_config().N_JOBS)(delayed(_sweep_row)(spec, v, cfg.seed) for v in values)
    if cfg.format == "csv":
        text = _table(rows)
    else:
        text = json.dumps({"schema_version": get_config().SCHEMA_VERSION, "family": spec.family, "rows": rows},
                          sort_keys=True, indent=2)
    _emit(text, cfg.output)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    suite = VerificationSuite(get_config(), seed=cfg.seed, dims=cfg.dims or None)
    report = suite.run(cfg.only or None)
    if cfg.format == "csv":
        rows = [{"check": c.name, "passed": int(c.passed), "slack": c.slack, "cases": c.cases} for c in report.checks]
        text = _table(rows)
    else:
        text = report.to_json()
    _emit(text, cfg.output)
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_list(cfg: RunConfig) -> int:
    listing = {"scenarios": list_scenarios(), "sweep_families": list(SWEEP_FAMILIES), "checks": available_checks()}
    if cfg.format == "csv":
        rows = [{"scenario": name} for name in listing["scenarios"]]
        text = _table(rows)
    else:
        text = json.dumps(listing, sort_keys=True, indent=2)
    _emit(text, cfg.output)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify, "list": cmd_list}


def _fail(exc: BaseException) -> int:
    detail = " ".join(str(exc).split())
    sys.stderr.write(f"error={type(exc).__name__} detail={detail}\n")
    return EXIT_INPUT


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging(get_config().LOG_LEVEL)
    try:
        cfg = parse_run_config(argv)
        with overridden(**cfg.tolerances):
            return COMMANDS[cfg.command](cfg)
    except (UsageError, QopsError, ValidationError, KeyError, OSError, ValueError, yaml.YAMLError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
