"""Command-line entry point.

Settings resolve as built-in defaults, then a JSON config file (flat keys
named like the flags), then explicit flags. Every output starts with a
provenance header holding the resolved settings.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, TextIO

import numpy as np

from . import __version__
from .bposd import PriorVector
from .codes import FAMILIES, build_code, min_logical_weight
from .experiments import (
    CSV_FIELDS,
    DEFAULT_CAP,
    DEFAULT_EPS_GRID,
    DEFAULT_P_STAR,
    Case,
    lemma_counterexamples,
    sweep,
)
from .noise import ErrorModel

COMMANDS = ("code-info", "sweep", "learn", "calibrate", "lemma")
FORMATS = ("csv", "jsonl")
SEED_ENV = "PRIORQEC_SEED"
MAX_REPORTED_COUNTEREXAMPLES = 20


class ConfigError(ValueError):
    """Invalid or inconsistent run settings."""


def _floats(value: Any) -> tuple[float, ...]:
    items = value.split(",") if isinstance(value, str) else list(value)
    return tuple(float(x) for x in items if str(x).strip() != "")


def _ints(value: Any) -> tuple[int, ...]:
    items = value.split(",") if isinstance(value, str) else list(value)
    return tuple(int(x) for x in items if str(x).strip() != "")


def _cases(value: Any) -> tuple[int, ...]:
    items = value.split(",") if isinstance(value, str) else list(value)
    return tuple(Case.parse(x).number for x in items)


def _window(value: Any) -> tuple[int, int] | None:
    if value is None:
        return None
    w = _ints(value)
    if len(w) != 2:
        raise ValueError("window needs two round numbers, start,stop")
    return w[0], w[1]


@dataclass(frozen=True)
class Option:
    name: str
    convert: Callable[[Any], Any]
    help: str
    commands: tuple[str, ...] = COMMANDS


OPTIONS = (
    Option("code", str, f"code family: {', '.join(FAMILIES)}"),
    Option("d", int, "code distance (>= 2)"),
    Option("seed", int, f"random seed (default ${SEED_ENV} or 0)"),
    Option("output", str, "output path (default stdout)"),
    Option("format", str, "csv or jsonl", ("sweep", "learn", "calibrate", "lemma")),
    Option("cases", _cases, "comma list of cases 1,2,3 or names", ("sweep",)),
    Option("eps", _floats, "comma list of background rates for scaling fits", ("sweep", "learn", "calibrate")),
    Option("p_star", float, "flip rate of the bad qubit", ("sweep", "learn")),
    Option("bad_site", int, "index of the bad qubit", ("sweep", "learn")),
    Option("max_weight", int, "weight cap for codes above 20 qubits", ("sweep",)),
    Option("gamma", float, "prior update gain", ("learn", "calibrate")),
    Option("rounds", int, "closed-loop rounds", ("learn", "calibrate")),
    Option("background", float, "background flip rate during the loop (lemma: uniform prior)",
           ("learn", "calibrate", "lemma")),
    Option("gamma_theta", float, "angle update gain", ("calibrate",)),
    Option("theta_target", float, "target rotation angle in radians", ("calibrate",)),
    Option("theta0", float, "hidden gate offset in radians", ("calibrate",)),
    Option("theta_initial", float, "starting control angle", ("calibrate",)),
    Option("target_qubit", int, "qubit driven by the gate", ("calibrate",)),
    Option("window", _window, "start,stop rounds for convergence statistics", ("calibrate",)),
    Option("known_sites", _ints, "comma list of qubits with known elevated rate", ("lemma",)),
    Option("known_prior", float, "prior on the known sites", ("lemma",)),
    Option("n2", int, "number of extra flips at unknown locations", ("lemma",)),
)
OPTION_MAP = {o.name: o for o in OPTIONS}


@dataclass
class RunConfig:
    command: str
    code: str = "rotated"
    d: int = 4
    seed: int = 0
    output: str | None = None
    format: str = "csv"
    cases: tuple[int, ...] = (1, 2, 3)
    eps: tuple[float, ...] = DEFAULT_EPS_GRID
    p_star: float = DEFAULT_P_STAR
    bad_site: int = 0
    max_weight: int = DEFAULT_CAP
    gamma: float = 0.01
    rounds: int = 2000
    background: float = 1e-3
    gamma_theta: float = 0.02
    theta_target: float = math.pi / 3
    theta0: float = 0.3
    theta_initial: float = 0.0
    target_qubit: int = 0
    window: tuple[int, int] | None = None
    known_sites: tuple[int, ...] = (0,)
    known_prior: float = DEFAULT_P_STAR
    n2: int = 1
    config_file: str | None = field(default=None)

    def provenance(self) -> dict:
        """Settings this command reads, plus the package version."""
        keep = {"command", "config_file"} | {o.name for o in OPTIONS if self.command in o.commands}
        d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items() if k in keep}
        d["version"] = __version__
        return d


COMMAND_DEFAULTS = {
    "calibrate": {"code": "unrotated", "rounds": 4000},
}


def _normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def load_config_file(path: str, command: str) -> dict[str, Any]:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    out = {}
    for key, value in raw.items():
        name = _normalize_key(key)
        if name == "command":
            if value != command:
                raise ConfigError(f"config file is for {value!r}, not {command!r}")
            continue
        opt = OPTION_MAP.get(name)
        if opt is None or command not in opt.commands:
            raise ConfigError(f"unknown config key {key!r} for {command}")
        try:
            out[name] = opt.convert(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="priorqec", description="Prior-informed surface-code decoding experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for command in COMMANDS:
        p = sub.add_parser(command, help=f"run {command}")
        p.add_argument("--config", dest="config_file", default=None, help="JSON file with flat keys named like the flags")
        for opt in OPTIONS:
            if command in opt.commands:
                flag = "--" + opt.name.replace("_", "-")
                p.add_argument(flag, dest=opt.name, type=opt.convert, default=argparse.SUPPRESS, help=opt.help)
    return parser


def _validate(cfg: RunConfig) -> None:
    if cfg.code not in FAMILIES:
        raise ConfigError(f"code must be one of {sorted(FAMILIES)}")
    if cfg.d < 2:
        raise ConfigError("d must be >= 2")
    if cfg.format not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    for e in cfg.eps:
        if not 0.0 < e < 0.5:
            raise ConfigError(f"eps values must lie in (0, 0.5), got {e}")
    if cfg.command in ("sweep", "learn") and len(cfg.eps) < 2:
        raise ConfigError("need at least two eps values for a scaling fit")
    if cfg.command in ("learn", "calibrate", "lemma") and not 0.0 < cfg.background < 0.5:
        raise ConfigError("background must lie in (0, 0.5)")
    for name in ("p_star", "known_prior"):
        if not 0.0 <= getattr(cfg, name) <= 1.0:
            raise ConfigError(f"{name} must be a probability")
    for name in ("gamma", "gamma_theta"):
        if not 0.0 < getattr(cfg, name) <= 1.0:
            raise ConfigError(f"{name} must lie in (0, 1]")
    if cfg.rounds < 1:
        raise ConfigError("rounds must be >= 1")
    if not -math.pi < cfg.theta_target < math.pi:
        raise ConfigError("theta_target must lie in (-pi, pi)")
    if cfg.max_weight < 0 or cfg.n2 < 0:
        raise ConfigError("max_weight and n2 must be non-negative")
    if cfg.window is not None and not 0 <= cfg.window[0] < cfg.window[1] <= cfg.rounds:
        raise ConfigError(f"window must satisfy 0 <= start < stop <= rounds ({cfg.rounds})")
    n = build_code(cfg.code, cfg.d).n
    used = {"sweep": ("bad_site",), "learn": ("bad_site",), "calibrate": ("target_qubit",)}.get(cfg.command, ())
    for name in used:
        if not 0 <= getattr(cfg, name) < n:
            raise ConfigError(f"{name} must be < n = {n}")
    if cfg.command == "lemma" and any(not 0 <= q < n for q in cfg.known_sites):
        raise ConfigError(f"known_sites must be < n = {n}")


def parse_config(argv: Iterable[str] | None = None) -> RunConfig:
    """Resolve defaults, config file and flags into a validated RunConfig.

    Raises ``SystemExit(2)`` with a usage message on any invalid setting.
    """
    parser = build_parser()
    args = vars(parser.parse_args(None if argv is None else list(argv)))
    command = args.pop("command")
    config_file = args.pop("config_file", None)
    values: dict[str, Any] = dict(COMMAND_DEFAULTS.get(command, {}))
    env_seed = os.environ.get(SEED_ENV)
    try:
        if env_seed is not None and env_seed.strip():
            values["seed"] = int(env_seed)
        if config_file:
            values.update(load_config_file(config_file, command))
        values.update(args)
        cfg = RunConfig(command=command, config_file=config_file, **values)
        _validate(cfg)
    except (ConfigError, ValueError) as exc:
        parser.error(f"{command}: {exc}")
    return cfg


# output


def _fmt(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


class Writer:
    """Sections of CSV tables or typed JSON lines after a provenance header."""

    def __init__(self, stream: TextIO, fmt: str, provenance: dict):
        self.stream = stream
        self.fmt = fmt
        if fmt == "csv":
            stream.write("# priorqec " + json.dumps(provenance, sort_keys=True) + "\n")
        else:
            stream.write(json.dumps({"type": "provenance", **provenance}, sort_keys=True) + "\n")
        self._sections = 0

    def table(self, name: str, fields: Iterable[str], rows: Iterable[dict]) -> None:
        fields = list(fields)
        if self.fmt == "csv":
            if self._sections:
                self.stream.write("\n")
            self.stream.write(f"# {name}\n")
            w = csv.writer(self.stream, lineterminator="\n")
            w.writerow(fields)
            for row in rows:
                w.writerow([_fmt(row.get(f)) for f in fields])
        else:
            for row in rows:
                clean = {f: _json_value(row.get(f)) for f in fields}
                self.stream.write(json.dumps({"type": name, **clean}) + "\n")
        self._sections += 1


def _json_value(v: Any) -> Any:
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, tuple):
        return list(v)
    return v


FIT_FIELDS = ("code", "d", "case", "exponent", "intercept", "residual")


def _fit_row(fit) -> dict:
    return {"code": fit.code, "d": fit.distance, "case": fit.case_id, "exponent": fit.exponent,
            "intercept": fit.intercept, "residual": fit.residual}


def _record_rows(records, seed) -> list[dict]:
    rows = []
    for r in records:
        r.seed = seed
        rows.append(r.as_row())
    return rows


def run_code_info(cfg: RunConfig, out: TextIO) -> None:
    code = build_code(cfg.code, cfg.d)
    info = {
        "code": code.name,
        "d": code.d,
        "n": code.n,
        "k": code.k,
        "hz_rows": code.hz.n_rows,
        "hx_rows": code.hx.n_rows,
        "check_weights": {key: {str(w): c for w, c in hist.items()}
                          for key, hist in code.check_weight_histogram().items()},
        "logical_z": list(code.logical_z.support()),
        "logical_x": list(code.logical_x.support()),
        "partner_of_0": code.stabilizer_partner(0),
        "version": __version__,
    }
    if code.n <= 26:
        info["min_logical_weight"] = min_logical_weight(code)
    out.write(json.dumps(info, indent=2) + "\n")


def run_sweep(cfg: RunConfig, out: TextIO) -> None:
    code = build_code(cfg.code, cfg.d)
    records, fits = sweep(code, cfg.cases, cfg.eps, cfg.p_star, cfg.bad_site, cfg.max_weight)
    w = Writer(out, cfg.format, cfg.provenance())
    w.table("failure", CSV_FIELDS, _record_rows(records, cfg.seed))
    w.table("fit", FIT_FIELDS, [_fit_row(f) for f in fits])


def run_learn(cfg: RunConfig, out: TextIO) -> None:
    from .adaptive import run_learning

    code = build_code(cfg.code, cfg.d)
    truth = ErrorModel(code.n, cfg.background, {cfg.bad_site: cfg.p_star})
    run = run_learning(code, truth, cfg.gamma, cfg.rounds, cfg.seed, cfg.eps,
                       sweep_overrides={cfg.bad_site: cfg.p_star})
    stride = max(1, cfg.rounds // len(run.history)) if len(run.history) else 1
    prior_fields = [f"p{i}" for i in range(code.n)]
    w = Writer(out, cfg.format, cfg.provenance())
    w.table(
        "priors",
        ["round", *prior_fields],
        ({"round": (k + 1) * stride, **dict(zip(prior_fields, map(float, row)))} for k, row in enumerate(run.history)),
    )
    w.table("failure", CSV_FIELDS, _record_rows(run.before + run.after, cfg.seed))
    w.table("fit", FIT_FIELDS, [_fit_row(f) for f in (run.fit_before, run.fit_after, run.fit_unfloored)])
    w.table("soft", ("corrected_bits", "mean_soft"),
            [{"corrected_bits": int(run.soft_on_support.size), "mean_soft": run.mean_soft_on_support}])


def run_calibrate(cfg: RunConfig, out: TextIO) -> None:
    from .adaptive import CALIBRATION_FIELDS, gate_flip_probability, run_calibration

    code = build_code(cfg.code, cfg.d)
    run = run_calibration(
        code, cfg.theta_target, cfg.theta0, cfg.gamma_theta, cfg.gamma, cfg.background, cfg.rounds,
        cfg.seed, cfg.theta_initial, cfg.target_qubit, cfg.window, cfg.eps,
    )
    w = Writer(out, cfg.format, cfg.provenance())
    w.table("history", CALIBRATION_FIELDS, (dict(zip(CALIBRATION_FIELDS, row)) for row in run.history))
    w.table("failure", CSV_FIELDS, _record_rows(run.records, cfg.seed))
    w.table("fit", FIT_FIELDS, [_fit_row(run.fit)])
    w.table(
        "convergence",
        ("window_start", "window_stop", "mean_flip_rate", "p_target", "min_prior_target"),
        [{"window_start": run.window[0], "window_stop": run.window[1], "mean_flip_rate": run.window_flip_rate,
          "p_target": gate_flip_probability(cfg.theta_target), "min_prior_target": run.window_min_prior}],
    )


def run_lemma(cfg: RunConfig, out: TextIO) -> None:
    code = build_code(cfg.code, cfg.d)
    known = sorted(set(cfg.known_sites))
    informed = np.full(code.n, cfg.background)
    informed[known] = cfg.known_prior
    rows = []
    for label, priors in (("informed", informed), ("uniform", np.full(code.n, cfg.background))):
        bad = lemma_counterexamples(code, known, cfg.n2, PriorVector(priors))
        rows.append({
            "priors": label,
            "known_sites": " ".join(map(str, known)),
            "n2": cfg.n2,
            "passed": not bad,
            "counterexamples": len(bad),
            "examples": ";".join(" ".join(map(str, e.support())) for e in bad[:MAX_REPORTED_COUNTEREXAMPLES]),
        })
    w = Writer(out, cfg.format, cfg.provenance())
    w.table("lemma", ("priors", "known_sites", "n2", "passed", "counterexamples", "examples"), rows)


RUNNERS = {
    "code-info": run_code_info,
    "sweep": run_sweep,
    "learn": run_learn,
    "calibrate": run_calibrate,
    "lemma": run_lemma,
}


def _origin(exc: BaseException) -> str:
    frames = traceback.extract_tb(exc.__traceback__)
    return Path(frames[-1].filename).stem if frames else "priorqec"


def execute(cfg: RunConfig, stdout: TextIO | None = None) -> int:
    """Run one command; returns the process exit status."""
    stdout = stdout or sys.stdout
    try:
        if cfg.output:
            with open(cfg.output, "w", newline="") as fh:
                RUNNERS[cfg.command](cfg, fh)
        else:
            RUNNERS[cfg.command](cfg, stdout)
    except (ValueError, RuntimeError, OSError, ImportError) as exc:
        print(f"priorqec {cfg.command}: {_origin(exc)}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: Iterable[str] | None = None) -> int:
    return execute(parse_config(argv))


if __name__ == "__main__":
    sys.exit(main())
