"""Command-line front end.

Subcommands: ``run``, ``sweep``, ``oracle-check`` and ``ghz``.  Exit codes:
0 success, 1 configuration error, 2 internal-consistency error (and, for
``oracle-check``, an engine/oracle disagreement of 1e-10 or more).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .channels import NoiseParams
from .experiment import (
    FORMATS,
    THETA_DISTS,
    ConfigError,
    ExperimentConfig,
    render,
    run_experiment,
    run_sweep,
)
from .protocol import Branch, InternalConsistencyError

EXIT_OK, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2
ORACLE_TOLERANCE = 1e-10

_CONFIG_KEYS = {"F", "a", "b", "c", "theta_a", "theta_b", "theta_dist", "dephasing", "trials",
                "seed", "parties", "branch", "format", "step", "workers", "draws"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with default values")
    for name in ("F", "a", "b", "c"):
        common.add_argument(f"--{name}", type=float, default=None, help=f"Bell-diagonal weight {name}")
    common.add_argument("--theta-dist", dest="theta_dist", choices=THETA_DISTS, default=None)
    common.add_argument("--dephasing", type=float, default=None, help="adversarial time-bin phase (rad)")
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--branch", choices=[b.value for b in Branch], default=None)
    common.add_argument("--parties", type=int, default=None)
    common.add_argument("--format", dest="format", choices=FORMATS, default=None)
    common.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")
    common.add_argument("--workers", type=int, default=None, help="worker processes (output is unchanged)")

    parser = argparse.ArgumentParser(prog="timebin-epp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one Monte Carlo experiment")
    sweep = sub.add_parser("sweep", parents=[common], help="experiments over the (F, a, b, c) simplex")
    sweep.add_argument("--step", type=float, default=None)
    oc = sub.add_parser("oracle-check", parents=[common], help="compare engine and dense oracle")
    oc.add_argument("--draws", type=int, default=None)
    sub.add_parser("ghz", parents=[common], help="multipartite experiment")
    return parser


def _load_file(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown configuration key")
    return data


def merged_settings(args: argparse.Namespace) -> dict:
    """File values overridden by any flag that was given."""
    settings = _load_file(args.config)
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _typed(settings: dict, key: str, kind, default):
    value = settings.get(key, default)
    if value is None:
        return None
    if kind is int and isinstance(value, float) and value.is_integer():
        value = int(value)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(key, f"expected {kind.__name__}, got {value!r}")
    return value


def parse_config(args: argparse.Namespace) -> ExperimentConfig:
    """Validated :class:`ExperimentConfig` from a file and/or flags.

    Raises
    ------
    ConfigError
        With the offending field name.
    """
    s = merged_settings(args)
    weights = {k: _typed(s, k, float, None) for k in ("F", "a", "b", "c")}
    if all(v is None for v in weights.values()):
        weights["F"] = 1.0
    weights = {k: (0.0 if v is None else v) for k, v in weights.items()}
    try:
        noise = NoiseParams(**weights, theta_a=_typed(s, "theta_a", float, 0.0),
                            theta_b=_typed(s, "theta_b", float, 0.0))
    except ValueError as exc:
        raise ConfigError("noise", str(exc)) from None
    return ExperimentConfig(
        noise=noise,
        trials=_typed(s, "trials", int, 1000),
        seed=_typed(s, "seed", int, 0),
        parties=_typed(s, "parties", int, 2),
        branch=_typed(s, "branch", str, None),
        theta_dist=_typed(s, "theta_dist", str, "zero"),
        dephasing=_typed(s, "dephasing", float, 0.0),
        output_format=_typed(s, "format", str, "json"),
    )


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _workers(settings: dict) -> int:
    workers = _typed(settings, "workers", int, 1)
    if workers < 1:
        raise ConfigError("workers", "must be at least 1")
    return workers


def cmd_run(args) -> int:
    config = parse_config(args)
    report = run_experiment(config, workers=_workers(merged_settings(args)))
    _emit(render(report, config.output_format), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = parse_config(args)
    settings = merged_settings(args)
    step = _typed(settings, "step", float, 0.1)
    reports = run_sweep(config, step, workers=_workers(settings))
    _emit(render(reports, config.output_format), args.out)
    return EXIT_OK


def cmd_ghz(args) -> int:
    settings = merged_settings(args)
    if "parties" not in settings:
        raise ConfigError("parties", "ghz needs --parties")
    return cmd_run(args)


def cmd_oracle_check(args) -> int:
    from .oracle import cross_check, randomized_cross_check

    settings = merged_settings(args)
    config = parse_config(args)
    draws = _typed(settings, "draws", int, 100)
    if draws < 1:
        raise ConfigError("draws", "must be at least 1")
    if any(k in settings for k in ("F", "a", "b", "c")):
        branches = [config.branch] if config.branch else list(Branch)
        dev = max(cross_check(config.noise, b, config.dephasing) for b in branches)
        doc = {"mode": "fixed", "config": replace(config, trials=1).echo()}
    else:
        dev = randomized_cross_check(config.seed, draws)
        doc = {"mode": "randomized", "seed": config.seed, "draws": draws}
    doc.update({"max_deviation": dev, "tolerance": ORACLE_TOLERANCE, "passed": dev < ORACLE_TOLERANCE})
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK if dev < ORACLE_TOLERANCE else EXIT_INTERNAL


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "oracle-check": cmd_oracle_check, "ghz": cmd_ghz}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InternalConsistencyError, RuntimeError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
