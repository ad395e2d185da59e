"""Monte Carlo experiments, simplex sweeps and report serialization.

Per-trial random streams are derived from the master seed with numpy's
``SeedSequence(seed, spawn_key=(stream, trial_index))``.  Every trial owns
its generator, so results do not depend on how trials are split across
worker processes; sums are taken with ``math.fsum``, which is exact and
therefore order independent.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .channels import NoiseParams
from .protocol import (
    Branch,
    _check_parties,
    accepting_patterns,
    all_port_choices,
    branch_label,
    run_trial,
)

ENGINE_VERSION = f"ensemble-{__version__}"
ORACLE_VERSION = f"densematrix-{__version__}"
THETA_DISTS = ("zero", "uniform")
FORMATS = ("json", "csv")
MAX_SEED = 2**64 - 1

REPORT_FIELDS = (
    "success_probability",
    "mean_corrected_fidelity",
    "trials",
    "pattern_counts",
    "branch_counts",
    "config",
    "engine_version",
    "oracle_version",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    noise: NoiseParams = field(default_factory=NoiseParams)
    trials: int = 1000
    seed: int = 0
    parties: int = 2
    branch: Branch | None = None
    theta_dist: str = "zero"
    dephasing: float = 0.0
    output_format: str = "json"

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials", f"must be a positive integer, got {self.trials!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {self.seed!r}")
        try:
            _check_parties(self.parties)
        except ValueError as exc:
            raise ConfigError("parties", str(exc)) from None
        if self.branch is not None:
            try:
                object.__setattr__(self, "branch", Branch(self.branch))
            except ValueError:
                raise ConfigError("branch", f"unknown branch {self.branch!r}") from None
            if self.parties != 2:
                raise ConfigError("branch", "a fixed branch needs exactly two parties")
        if self.theta_dist not in THETA_DISTS:
            raise ConfigError("theta_dist", f"must be one of {THETA_DISTS}, got {self.theta_dist!r}")
        if not math.isfinite(self.dephasing):
            raise ConfigError("dephasing", "must be a finite angle in radians")
        if self.output_format not in FORMATS:
            raise ConfigError("output_format", f"must be one of {FORMATS}, got {self.output_format!r}")

    def echo(self) -> dict:
        """Plain-data copy for inclusion in reports."""
        noise = asdict(self.noise)
        return {
            "noise": noise,
            "trials": self.trials,
            "seed": self.seed,
            "parties": self.parties,
            "branch": self.branch.value if self.branch else None,
            "theta_dist": self.theta_dist,
            "dephasing": self.dephasing,
        }


@dataclass(frozen=True)
class Report:
    success_probability: float
    mean_corrected_fidelity: float
    trials: int
    pattern_counts: dict[str, int]
    branch_counts: dict[str, int]
    config: dict
    engine_version: str = ENGINE_VERSION
    oracle_version: str = ORACLE_VERSION

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in REPORT_FIELDS}


def trial_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def _run_chunk(args) -> list[tuple[str, str, float]]:
    config, stream, start, stop = args
    out = []
    for i in range(start, stop):
        rec = run_trial(
            config.noise,
            trial_rng(config.seed, i, stream),
            parties=config.parties,
            branch=config.branch,
            theta_dist=config.theta_dist,
            dephasing=config.dephasing,
        )
        out.append((rec.outcome.pattern, rec.branch, rec.corrected_fidelity))
    return out


def _chunks(n: int, parts: int) -> list[tuple[int, int]]:
    size = math.ceil(n / parts)
    return [(i, min(n, i + size)) for i in range(0, n, size)]


def run_experiment(config: ExperimentConfig, *, workers: int = 1, stream: int = 0) -> Report:
    """Aggregate ``config.trials`` independent trials into a :class:`Report`.

    ``workers > 1`` spreads trials over processes; the report is identical
    for any worker count.
    """
    if workers < 1:
        raise ConfigError("workers", "must be at least 1")
    jobs = [(config, stream, a, b) for a, b in _chunks(config.trials, workers)]
    if workers == 1:
        rows = _run_chunk(jobs[0])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [r for part in pool.map(_run_chunk, jobs) for r in part]

    n = config.parties
    accepting = set(accepting_patterns(n))
    patterns = Counter(r[0] for r in rows)
    branches = Counter(r[1] for r in rows)
    pattern_counts = {p: patterns.get(p, 0) for p in accepting_patterns(n)}
    for p in sorted(set(patterns) - accepting):
        pattern_counts[p] = patterns[p]
    branch_keys = sorted({branch_label(c) for c in all_port_choices(n)})
    branch_counts = {b: branches.get(b, 0) for b in branch_keys}
    successes = sum(c for p, c in patterns.items() if p in accepting)
    return Report(
        success_probability=successes / config.trials,
        mean_corrected_fidelity=math.fsum(r[2] for r in rows) / config.trials,
        trials=config.trials,
        pattern_counts=pattern_counts,
        branch_counts=branch_counts,
        config=config.echo(),
    )


def simplex_grid(step: float) -> list[NoiseParams]:
    """All ``(F, a, b, c)`` with coordinates on multiples of ``step`` summing to 1."""
    if not math.isfinite(step) or step <= 0:
        raise ConfigError("step", f"must be a positive number, got step={step!r}")
    k = round(1 / step)
    if k < 1 or abs(k * step - 1) > 1e-9:
        raise ConfigError("step", f"1/step must be a positive integer, got step={step!r}")
    points = []
    for i, j, l in itertools.product(range(k + 1), repeat=3):
        m = k - i - j - l
        if m >= 0:
            points.append(NoiseParams(F=i / k, a=j / k, b=l / k, c=m / k))
    return points


def run_sweep(config: ExperimentConfig, step: float = 0.1, *, workers: int = 1) -> list[Report]:
    """One report per simplex grid point; point ``p`` uses random stream ``p``."""
    reports = []
    for p, noise in enumerate(simplex_grid(step)):
        point = replace(config, noise=replace(noise, theta_a=config.noise.theta_a,
                                              theta_b=config.noise.theta_b))
        reports.append(run_experiment(point, workers=workers, stream=p))
    return reports


# -- serialization -----------------------------------------------------------------

def reports_to_json(reports: Report | list[Report]) -> str:
    if isinstance(reports, Report):
        doc = reports.to_dict()
    else:
        doc = {"reports": [r.to_dict() for r in reports]}
    return json.dumps(doc, indent=2) + "\n"


def _csv_header(report: Report) -> list[str]:
    return (["F", "a", "b", "c", "trials", "seed", "parties", "branch", "theta_dist", "dephasing",
             "success_probability", "mean_corrected_fidelity"]
            + [f"pattern_{p}" for p in report.pattern_counts]
            + [f"branch_{b}" for b in report.branch_counts])


def reports_to_csv(reports: Report | list[Report]) -> str:
    if isinstance(reports, Report):
        reports = [reports]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = _csv_header(reports[0])
    writer.writerow(header)
    for r in reports:
        if _csv_header(r) != header:
            raise ValueError("reports in one CSV document must share pattern and branch keys")
        cfg = r.config
        noise = cfg["noise"]
        writer.writerow(
            [repr(noise[k]) for k in ("F", "a", "b", "c")]
            + [r.trials, cfg["seed"], cfg["parties"], cfg["branch"] or "", cfg["theta_dist"],
               repr(cfg["dephasing"]), repr(r.success_probability), repr(r.mean_corrected_fidelity)]
            + list(r.pattern_counts.values())
            + list(r.branch_counts.values())
        )
    return buf.getvalue()


def render(reports: Report | list[Report], fmt: str = "json") -> str:
    if fmt == "json":
        return reports_to_json(reports)
    if fmt == "csv":
        return reports_to_csv(reports)
    raise ConfigError("format", f"must be one of {FORMATS}, got {fmt!r}")
