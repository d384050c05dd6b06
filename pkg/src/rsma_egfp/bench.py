"""Seeded benchmark experiments over channel ensembles.

An experiment is described by a flat ``key = value`` text file; list values
are comma separated and ``#`` starts a comment::

    experiment = sweep-antennas
    K = 16
    Nt = 16, 32, 64
    snr_db = 10
    num_realizations = 5
    base_seed = 1
    variant = both

Every coordinate tuple ``(K, Nt, snr_db, kappa)`` and realization index
gets its own channel seed, shared by all variants and schemes so that
their results are paired. Outputs are a CSV of aggregated rows and a JSON
manifest; neither contains anything that changes between reruns except
the ``secs_mean`` column.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .csit import egfp_solve_imperfect, gen_imperfect_channel
from .egfp import EgfpConfig, solve
from .extragradient import DivergenceError, EgConfig
from .model import SystemConfig, gen_channel

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultRow",
    "ExperimentResult",
    "parse_config",
    "load_config",
    "realization_seed",
    "run_experiment",
    "compare_variants",
    "CSV_COLUMNS",
]

EXPERIMENTS = ("convergence-trace", "sweep-antennas", "sweep-users", "sweep-kappa",
               "sdma-compare")
VARIANTS = ("full", "lowdim", "both")
CHANNEL_MODELS = ("iid", "imperfect")

CSV_COLUMNS = ["K", "Nt", "snr_db", "kappa", "variant", "mmf_nats_mean", "mmf_bits_mean",
               "secs_mean", "outer_iters_mean", "inner_iters_mean", "n_realizations"]
TRACE_COLUMNS = ["K", "Nt", "snr_db", "kappa", "variant", "realization", "iteration",
                 "outer_obj", "mmf_opt", "surrogate_start", "surrogate_end",
                 "inner_iters", "accepted"]
PAIRED_COLUMNS = ["K", "Nt", "snr_db", "kappa", "mmf_full_mean", "mmf_lowdim_mean",
                  "rel_diff_mean", "rel_diff_max", "secs_full_mean", "secs_lowdim_mean",
                  "time_ratio", "n_pairs"]


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    K: tuple
    Nt: tuple
    snr_db: tuple = (10.0,)
    kappa: tuple = (0.0,)
    num_realizations: int = 100
    base_seed: int = 0
    variant: str = "full"
    outer_tol: float = 1e-3
    inner_tol: float = 1e-3
    residual_tol: Optional[float] = 1e-3
    max_outer_iters: int = 200
    max_inner_iters: int = 2000
    channel_model: Optional[str] = None
    mc_draws: int = 0
    name: str = "experiment"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
        for key in ("K", "Nt", "snr_db", "kappa"):
            if len(getattr(self, key)) == 0:
                raise ConfigError(f"{key} list must be nonempty")
        if any(k < 1 for k in self.K) or any(n < 1 for n in self.Nt):
            raise ConfigError("K and Nt entries must be >= 1")
        if any(not 0.0 <= k < 1.0 for k in self.kappa):
            raise ConfigError("kappa entries must lie in [0, 1)")
        if self.num_realizations < 1:
            raise ConfigError("num_realizations must be >= 1")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {', '.join(VARIANTS)}")
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.residual_tol is not None and not self.residual_tol > 0:
            raise ConfigError("residual_tol must be positive or none")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1 or self.mc_draws < 0:
            raise ConfigError("iteration caps must be >= 1 and mc_draws >= 0")
        model = self.channel_model
        if model is None:
            imperfect = any(k > 0 for k in self.kappa) or self.experiment in (
                "sweep-kappa", "sdma-compare")
            model = "imperfect" if imperfect else "iid"
            object.__setattr__(self, "channel_model", model)
        if model not in CHANNEL_MODELS:
            raise ConfigError(f"channel_model must be one of {', '.join(CHANNEL_MODELS)}")
        if model == "iid" and any(k > 0 for k in self.kappa):
            raise ConfigError("kappa > 0 needs channel_model = imperfect")

    @property
    def variants(self) -> tuple:
        return ("full", "lowdim") if self.variant == "both" else (self.variant,)

    @property
    def schemes(self) -> tuple:
        return ("rsma", "sdma") if self.experiment == "sdma-compare" else ("rsma",)

    def coordinates(self):
        return list(itertools.product(self.K, self.Nt, self.snr_db, self.kappa))

    def solver_config(self, variant: str) -> EgfpConfig:
        eg = EgConfig(inner_tol=self.inner_tol, residual_tol=self.residual_tol,
                      max_inner_iters=self.max_inner_iters)
        return EgfpConfig(outer_tol=self.outer_tol, max_outer_iters=self.max_outer_iters,
                          eg=eg, variant=variant)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("K", "Nt", "snr_db", "kappa"):
            d[key] = list(d[key])
        return d


_INT_LISTS = ("K", "Nt")
_FLOAT_LISTS = ("snr_db", "kappa")
_INTS = ("num_realizations", "base_seed", "max_outer_iters", "max_inner_iters", "mc_draws")
_FLOATS = ("outer_tol", "inner_tol", "residual_tol")
_ALIASES = {"N_t": "Nt", "num_users": "K", "snr": "snr_db", "epsilon1": "outer_tol",
            "epsilon2": "inner_tol", "realizations": "num_realizations", "seed": "base_seed"}


def _convert(key, raw):
    try:
        if key in _INT_LISTS or key in _FLOAT_LISTS:
            parts = [p.strip() for p in raw.split(",")]
            if parts == [""]:
                return ()
            if any(p == "" for p in parts):
                raise ConfigError(f"empty list entry for {key}")
            conv = int if key in _INT_LISTS else float
            return tuple(conv(p) for p in parts)
        if key in _INTS:
            return int(raw)
        if key in _FLOATS:
            return None if raw.lower() == "none" else float(raw)
        return raw
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, name: str = "experiment") -> ExperimentConfig:
    """Parse ``key = value`` lines into a validated :class:`ExperimentConfig`."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {"name": name}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    for req in ("experiment", "K", "Nt"):
        if req not in values:
            raise ConfigError(f"missing required key {req!r}")
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, name=path.stem)


def realization_seed(base_seed: int, coords, r: int) -> int:
    """``base_seed`` XOR a stable 63-bit hash of ``(coords, r)``."""
    K, Nt, snr, kappa = coords
    key = f"{int(K)}|{int(Nt)}|{float(snr)!r}|{float(kappa)!r}|{int(r)}".encode()
    h = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little") >> 1
    return int(base_seed) ^ h


@dataclass(frozen=True)
class ResultRow:
    K: int
    Nt: int
    snr_db: float
    kappa: float
    variant: str
    mmf_nats_mean: float
    mmf_bits_mean: float
    secs_mean: float
    outer_iters_mean: float
    inner_iters_mean: float
    n_realizations: int

    def values(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    runs: list
    failures: list
    paths: dict = field(default_factory=dict)
    paired: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _label(scheme, variant):
    return variant if scheme == "rsma" else f"sdma-{variant}"


def _solve_task(task) -> dict:
    """Worker: generate the channel, solve, return a plain record."""
    cfg, coords, r, seed, variant, scheme = task
    K, Nt, snr, kappa = coords
    sys_cfg = SystemConfig.from_snr_db(K, Nt, snr)
    common = scheme == "rsma"
    solver_cfg = cfg.solver_config(variant)
    record = {"K": K, "Nt": Nt, "snr_db": snr, "kappa": kappa,
              "variant": _label(scheme, variant), "realization": r, "seed": seed}
    try:
        if cfg.channel_model == "imperfect":
            ics = gen_imperfect_channel(sys_cfg, kappa, seed)
            rep = egfp_solve_imperfect(ics, sys_cfg.tx_power, solver_cfg, seed, common,
                                       cfg.mc_draws)
        else:
            ch = gen_channel(sys_cfg, seed)
            rep = solve(ch, sys_cfg.tx_power, solver_cfg, seed, common)
    except DivergenceError as exc:
        record["error"] = f"diverged at inner iteration {exc.iteration}"
        return record
    record.update(mmf_nats=rep.mmf_rate, outer_iters=rep.outer_iters,
                  inner_iters=rep.inner_iters_total, termination=rep.termination,
                  secs=rep.elapsed_seconds)
    if "mmf_rate_mc" in rep.extras:
        record["mmf_mc_nats"] = rep.extras["mmf_rate_mc"]
    if cfg.experiment == "convergence-trace":
        record["trace"] = rep.trace
    return record


def _tasks(cfg: ExperimentConfig, base_seed: int):
    tasks = []
    seeds = set()
    for coords in cfg.coordinates():
        for r in range(cfg.num_realizations):
            seed = realization_seed(base_seed, coords, r)
            seeds.add(seed)
            for scheme in cfg.schemes:
                for variant in cfg.variants:
                    tasks.append((cfg, coords, r, seed, variant, scheme))
    if len(seeds) != len(cfg.coordinates()) * cfg.num_realizations:
        raise RuntimeError("realization seeds collide; change base_seed")
    return tasks


def _execute(tasks, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [_solve_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve_task, tasks, chunksize=1))


def _group_key(rec):
    return (rec["K"], rec["Nt"], rec["snr_db"], rec["kappa"], rec["variant"])


def _mean(recs, name) -> float:
    return float(np.mean([rec[name] for rec in recs]))


def _aggregate(cfg: ExperimentConfig, runs: list) -> list:
    order = []
    groups = {}
    for coords in cfg.coordinates():
        for scheme in cfg.schemes:
            for variant in cfg.variants:
                key = (*coords, _label(scheme, variant))
                order.append(key)
                groups[key] = []
    for rec in runs:
        groups[_group_key(rec)].append(rec)
    rows = []
    for key in order:
        recs = sorted(groups[key], key=lambda rec: rec["realization"])
        if not recs:
            continue
        nats = _mean(recs, "mmf_nats")
        rows.append(ResultRow(*key, nats, nats / math.log(2.0), _mean(recs, "secs"),
                              _mean(recs, "outer_iters"), _mean(recs, "inner_iters"),
                              len(recs)))
    return rows


def compare_variants(runs_or_cfg, base_seed: Optional[int] = None, jobs: int = 1) -> list:
    """Pair full- and low-dimensional runs on identical channels.

    Accepts run records from :func:`run_experiment` or an
    :class:`ExperimentConfig` (which is then run with both variants).
    Returns one dict per coordinate tuple with the mean and max relative
    MMF difference ``|lowdim - full| / full`` and the time ratio
    ``lowdim / full``.
    """
    if isinstance(runs_or_cfg, ExperimentConfig):
        cfg = runs_or_cfg
        if cfg.variant != "both":
            cfg = replace(cfg, variant="both")
        seed = cfg.base_seed if base_seed is None else base_seed
        runs = [rec for rec in _execute(_tasks(cfg, seed), jobs) if "error" not in rec]
    else:
        runs = [rec for rec in runs_or_cfg if "error" not in rec]
    by_key = {}
    for rec in runs:
        key = (rec["K"], rec["Nt"], rec["snr_db"], rec["kappa"])
        by_key.setdefault(key, {}).setdefault(rec["variant"], {})[rec["realization"]] = rec
    paired = []
    for key in sorted(by_key):
        full = by_key[key].get("full", {})
        low = by_key[key].get("lowdim", {})
        common_r = sorted(set(full) & set(low))
        if not common_r:
            continue
        f = np.array([full[r]["mmf_nats"] for r in common_r])
        lo = np.array([low[r]["mmf_nats"] for r in common_r])
        rel = np.abs(lo - f) / f
        tf = float(np.mean([full[r]["secs"] for r in common_r]))
        tl = float(np.mean([low[r]["secs"] for r in common_r]))
        paired.append(dict(zip(PAIRED_COLUMNS, [
            *key, float(f.mean()), float(lo.mean()), float(rel.mean()), float(rel.max()),
            tf, tl, tl / tf if tf > 0 else math.nan, len(common_r)])))
    return paired


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _manifest(cfg, base_seed, runs, failures):
    from . import __version__

    strip = ("secs", "trace")
    return {
        "config": cfg.to_dict(),
        "base_seed": base_seed,
        "library_version": __version__,
        "runs": [{k: v for k, v in rec.items() if k not in strip} for rec in runs],
        "failures": failures,
    }


def run_experiment(config: Union[str, os.PathLike, ExperimentConfig], out_dir=".",
                   jobs: int = 1, base_seed: Optional[int] = None) -> ExperimentResult:
    """Run every coordinate tuple and realization, then write the results.

    Files written to ``out_dir`` (``<name>`` is the config file stem):
    ``<name>.csv`` with :data:`CSV_COLUMNS`, ``<name>_manifest.json``
    (config echo, library version, per-run seeds and outcomes), plus
    ``<name>_trace.csv`` for convergence traces and ``<name>_paired.csv``
    when both variants run. Diverged runs are left out of the aggregates
    and listed under ``failures``.
    """
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    seed = cfg.base_seed if base_seed is None else int(base_seed)
    records = _execute(_tasks(cfg, seed), jobs)
    runs = [rec for rec in records if "error" not in rec]
    failures = [rec for rec in records if "error" in rec]
    rows = _aggregate(cfg, runs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / f"{cfg.name}.csv", "manifest": out / f"{cfg.name}_manifest.json"}
    _write_csv(paths["csv"], CSV_COLUMNS, [row.values() for row in rows])
    result = ExperimentResult(cfg, rows, runs, failures, paths)
    if cfg.experiment == "convergence-trace":
        paths["trace"] = out / f"{cfg.name}_trace.csv"
        trace_rows = []
        for rec in sorted(runs, key=lambda rec: (_group_key(rec), rec["realization"])):
            for entry in rec["trace"]:
                trace_rows.append([rec[c] for c in TRACE_COLUMNS[:6]]
                                  + [entry[c] for c in TRACE_COLUMNS[6:]])
        _write_csv(paths["trace"], TRACE_COLUMNS, trace_rows)
    if cfg.variant == "both":
        result.paired = compare_variants(runs)
        paths["paired"] = out / f"{cfg.name}_paired.csv"
        _write_csv(paths["paired"], PAIRED_COLUMNS,
                   [[p[c] for c in PAIRED_COLUMNS] for p in result.paired])
    with open(paths["manifest"], "w") as fh:
        json.dump(_manifest(cfg, seed, runs, failures), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result
