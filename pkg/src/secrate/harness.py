"""
Seeded experiment runner with CSV output.

Every experiment is a function of an :class:`ExperimentConfig` returning
named tables. Per-trial seeds come from ``SeedSequence(seed).spawn``, so
results do not depend on the number of workers, and each CSV starts with a
comment line carrying the digest of the config that produced it.
"""

import csv
import dataclasses
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import (
    InsufficientBudget,
    key_index_attack,
    observe,
    rd_attack,
    timesharing_attack,
)
from .codec import audit, decode, encode, equivocation, generate_codebook
from .ratedist import binary_hamming_rd, d_max, rd_curve
from .region import SURFACE_COLUMNS, gamma, r_de_estimate, surface_sample
from .source import Source, all_sequences, entropy, source_and_measure


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple
    rows: list


@dataclass
class ExperimentConfig:
    experiment: str
    pmf: list = None
    distortion: list = None
    n: int = None
    l: int = None
    R: float = None
    R_K: float = None
    delta: float = None
    eps: float = None
    D_E: float = None
    budgets: list = None
    n_values: list = None
    trials: int = None
    seed: int = 0
    out: str = "results"
    workers: int = 1

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def resolved(self):
        """Copy with per-experiment defaults filled in for every unset field."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        base = dict(COMMON_DEFAULTS, **EXPERIMENTS[self.experiment][1])
        data = dataclasses.asdict(self)
        for k, v in base.items():
            if data.get(k) is None:
                data[k] = v
        cfg = ExperimentConfig(**data)
        cfg.validate()
        return cfg

    def validate(self):
        if self.trials is None or int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        for name in ("R", "R_K", "D_E", "eps"):
            v = getattr(self, name)
            if v is not None and not (v >= 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be a finite number >= 0")
        if self.R is not None and self.R_K is not None and self.R < self.R_K:
            raise ConfigError("need R >= R_K")
        if self.delta is not None and not self.delta > 0:
            raise ConfigError("delta must be > 0")
        for name in ("n", "l"):
            v = getattr(self, name)
            if v is not None and int(v) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.budgets is not None and any(b < 0 for b in self.budgets):
            raise ConfigError("budgets must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            source_and_measure({"pmf": self.pmf, "distortion": self.distortion})
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"bad source or distortion: {exc}") from exc

    def digest(self):
        """SHA-256 of the config, ignoring the output path and worker count."""
        data = dataclasses.asdict(self)
        data.pop("out")
        data.pop("workers")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()

    def source_measure(self):
        return source_and_measure({"pmf": self.pmf, "distortion": self.distortion})


@dataclass
class RunManifest:
    config: dict
    config_digest: str
    trial_seeds: list
    version: str
    wall_clock: float
    outputs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


def trial_seeds(seed, trials):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(trials)]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    if isinstance(v, np.integer):
        return int(v)
    return v


def emit_csv(table, path, digest=None):
    """Write ``table`` with a header row; floats get 9 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if digest is not None:
            fh.write(f"# config_digest={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Inverse of :func:`emit_csv`: ``(digest, columns, rows)`` with numeric cells parsed."""
    digest = None
    with open(path, newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[0].startswith("# config_digest="):
        digest = lines.pop(0).split("=", 1)[1]
    reader = csv.reader([ln for ln in lines if ln])
    columns = tuple(next(reader))

    def parse(x):
        try:
            return int(x)
        except ValueError:
            try:
                return float(x)
            except ValueError:
                return x

    return digest, columns, [[parse(x) for x in row] for row in reader]


def _pmap(fn, items, workers):
    # results come back in item order, whatever the worker count
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- experiments

def exp_region_surface(cfg, seeds):
    source, measure = cfg.source_measure()
    rk = np.linspace(0.0, 1.0, 51)
    de = np.linspace(0.0, 0.5, 51)
    rows = surface_sample(source, measure, rk, de)
    return [Table("region-surface", SURFACE_COLUMNS, rows.tolist())], {}


def exp_rd_curve(cfg, seeds):
    source, measure = cfg.source_measure()
    curve = rd_curve(source, measure)
    binary = source.alphabet_size == 2 and measure.is_hamming()
    cols = ("distortion", "rate", "slope") + (("analytic",) if binary else ())
    rows = []
    for p in curve.points:
        row = [p.distortion, p.rate, p.slope]
        if binary:
            row.append(binary_hamming_rd(source.pmf[1], p.distortion))
        rows.append(row)
    summary = {"points": len(rows), "d_max": curve.d_max}
    if binary:
        summary["max_abs_error"] = float(max(abs(r[1] - r[3]) for r in rows))
    return [Table("rd-curve", cols, rows)], summary


def exp_roundtrip(cfg, seeds):
    source, _ = cfg.source_measure()
    cb = generate_codebook(source, cfg.n, cfg.R, cfg.R_K, seeds[0])
    rng = np.random.default_rng(seeds[0])
    rows = []
    mismatches = 0
    for s in all_sequences(source.alphabet_size, cfg.n):
        for key in range(cb.bin_size):
            out = encode(s, key, cb, cfg.delta, rng)
            ok = bool(np.array_equal(decode(out.message, key, cb), s))
            mismatches += out.success and not ok
            rows.append(["".join(map(str, s)), key, out.message.j_p, out.message.m_s, out.success, ok])
    cols = ("s", "key", "j_p", "m_s", "success", "decoded_ok")
    return [Table("roundtrip", cols, rows)], {"success_mismatches": int(mismatches),
                                              "successes": int(sum(r[4] for r in rows))}


def _audit_trial(args):
    pmf, dist, n, R, R_K, delta, eps, seed = args
    source, measure = source_and_measure({"pmf": pmf, "distortion": dist})
    curve = _curve_cache(tuple(pmf), None if dist is None else json.dumps(dist))
    cb = generate_codebook(source, n, R, R_K, seed)
    rep = audit(cb, measure, delta, eps, curve, seed=seed)
    return [n, seed, rep.min_gamma, rep.max_phi, rep.min_phi, int(rep.max_eta.max()),
            rep.A2, rep.A3, rep.A4, rep.sampled]


_CURVES = {}


def _curve_cache(pmf, dist):
    key = (pmf, dist)
    if key not in _CURVES:
        source, measure = source_and_measure({"pmf": list(pmf), "distortion": None if dist is None else json.loads(dist)})
        _CURVES[key] = rd_curve(source, measure)
    return _CURVES[key]


AUDIT_COLUMNS = ("n", "seed", "min_gamma", "max_phi", "min_phi", "max_eta", "A2", "A3", "A4", "sampled")


def exp_codebook_audit(cfg, seeds):
    args = [(cfg.pmf, cfg.distortion, cfg.n, cfg.R, cfg.R_K, cfg.delta, cfg.eps, s) for s in seeds]
    rows = _pmap(_audit_trial, args, cfg.workers)
    freq = {e: float(np.mean([r[6 + i] for r in rows])) for i, e in enumerate(("A2", "A3", "A4"))}
    return [Table("codebook-audit", AUDIT_COLUMNS, rows)], freq


def exp_lemma_trends(cfg, seeds):
    rows = []
    summary = {}
    for i, n in enumerate(cfg.n_values):
        # each blocklength gets its own seed stream
        sub = trial_seeds([cfg.seed, i], cfg.trials)
        args = [(cfg.pmf, cfg.distortion, n, cfg.R, cfg.R_K, cfg.delta, cfg.eps, s) for s in sub]
        got = _pmap(_audit_trial, args, cfg.workers)
        rows.extend(got)
        summary[str(n)] = {e: float(np.mean([r[6 + j] for r in got])) for j, e in enumerate(("A2", "A3", "A4"))}
    trend = [Table("lemma-trends", AUDIT_COLUMNS, rows)]
    freq_rows = [[int(n), v["A2"], v["A3"], v["A4"]] for n, v in summary.items()]
    trend.append(Table("lemma-frequencies", ("n", "A2", "A3", "A4"), freq_rows))
    return trend, summary


def sweep_lambdas(step=0.05):
    return np.round(np.arange(0.0, 1.0 + step / 2, step), 10)


def _attack_trial(args):
    pmf, dist, n, l, R, R_K, delta, D_E, budgets, cb_seed, seed = args
    source, measure = source_and_measure({"pmf": pmf, "distortion": dist})
    cb = _codebook_cache(tuple(pmf), n, R, R_K, cb_seed)
    rng = np.random.default_rng(seed)
    obs = observe(cb, l, delta, rng)
    dm = d_max(source, measure)
    rows = []
    ki = key_index_attack(obs, measure, D_E)
    for b in budgets:
        affordable = ki.bits <= math.floor(n * l * b + 1e-9)
        rows.append(["key-index", n, l, b, math.nan, ki.rate_spent, ki.distortion, affordable and ki.success])
        r = rd_attack(obs, measure, D_E, b, rng)
        rows.append(["rd", n, l, b, 1.0, r.rate_spent, r.distortion, r.success])
        for lam in sweep_lambdas():
            k = min(l, math.ceil((1 - lam) * l - 1e-9))
            # the covered blocks must absorb the whole distortion allowance
            D = min(D_E * l / (l - k), dm) if k < l else 0.0
            try:
                t = timesharing_attack(obs, measure, lam, D, b, rng, D_E=D_E)
                rows.append(["timesharing", n, l, b, lam, t.rate_spent, t.distortion, t.success])
            except InsufficientBudget:
                rows.append(["timesharing", n, l, b, lam, math.nan, math.nan, False])
    return rows


_CODEBOOKS = {}


def _codebook_cache(pmf, n, R, R_K, seed):
    key = (pmf, n, R, R_K, seed)
    if key not in _CODEBOOKS:
        _CODEBOOKS.clear()
        _CODEBOOKS[key] = generate_codebook(Source(list(pmf)), n, R, R_K, seed)
    return _CODEBOOKS[key]


ATTACK_COLUMNS = ("strategy", "n", "l", "budget", "lam", "rate_spent", "distortion", "success")


def summarize_attacks(rows):
    """Success frequency per ``(budget, strategy, lam)`` and the best strategy per budget."""
    groups = {}
    for strat, _, _, b, lam, _, _, ok in rows:
        groups.setdefault((b, strat, lam), []).append(bool(ok))
    freq = {k: float(np.mean(v)) for k, v in groups.items()}
    best = {}
    for (b, strat, lam), f in freq.items():
        best.setdefault(b, {})
        best[b][strat] = max(best[b].get(strat, 0.0), f)
        best[b]["any"] = max(best[b].get("any", 0.0), f)
    return freq, best


def exp_attack_sweep(cfg, seeds):
    source, measure = cfg.source_measure()
    g = gamma(cfg.R_K, cfg.D_E, rd_curve(source, measure)).value
    budgets = cfg.budgets if cfg.budgets is not None else [round(g + o, 10) for o in (-0.1, -0.05, 0.0, 0.05, 0.1)]
    cb_seed = trial_seeds([cfg.seed, 1], 1)[0]
    args = [(cfg.pmf, cfg.distortion, cfg.n, cfg.l, cfg.R, cfg.R_K, cfg.delta, cfg.D_E, list(budgets), cb_seed, s)
            for s in seeds]
    rows = [r for trial in _pmap(_attack_trial, args, cfg.workers) for r in trial]
    freq, best = summarize_attacks(rows)
    ftab = [[b, s, lam, f] for (b, s, lam), f in sorted(freq.items(), key=lambda kv: (kv[0][0], kv[0][1], np.nan_to_num(kv[0][2], nan=-1)))]
    summary = {"gamma": g, "best": {str(b): v for b, v in best.items()}}
    return [Table("attack-sweep", ATTACK_COLUMNS, rows),
            Table("attack-frequencies", ("budget", "strategy", "lam", "success_rate"), ftab)], summary


def exp_equivocation_tiny(cfg, seeds):
    source, measure = cfg.source_measure()
    rows = []
    bound = min(cfg.R_K, entropy(source))
    levels = [0.0, 0.25, 0.5] if cfg.D_E is None else sorted({0.0, cfg.D_E})
    for t, s in enumerate(seeds):
        cb = generate_codebook(source, cfg.n, cfg.R, cfg.R_K, s)
        h = equivocation(cb, cfg.delta)
        for de in levels:
            rows.append([t, s, de, r_de_estimate(cb, measure, de, cfg.delta), h, bound])
    cols = ("trial", "seed", "D_E", "r_de", "equivocation", "min_RK_H")
    return [Table("equivocation-tiny", cols, rows)], {}


COMMON_DEFAULTS = {"pmf": [0.5, 0.5], "trials": 1}

EXPERIMENTS = {
    "region-surface": (exp_region_surface, {}),
    "rd-curve": (exp_rd_curve, {}),
    "roundtrip": (exp_roundtrip, {"n": 4, "R": 1.0, "R_K": 0.5, "delta": 0.5}),
    "codebook-audit": (exp_codebook_audit, {"pmf": [0.8, 0.2], "n": 12, "R": 0.9, "R_K": 0.3,
                                            "delta": 0.25, "eps": 0.1, "trials": 50}),
    "lemma-trends": (exp_lemma_trends, {"pmf": [0.8, 0.2], "n_values": [8, 12, 16], "R": 0.9,
                                        "R_K": 0.3, "delta": 0.25, "eps": 0.15, "trials": 50}),
    "attack-sweep": (exp_attack_sweep, {"n": 10, "l": 20, "R": 1.5, "R_K": 0.3, "delta": 0.9,
                                        "D_E": 0.1, "trials": 200}),
    "equivocation-tiny": (exp_equivocation_tiny, {"n": 2, "R": 1.0, "R_K": 0.5, "delta": 0.5, "trials": 5}),
}


def run(config, write=True):
    """Run the named experiment; returns ``(manifest, tables)``.

    With ``write`` the tables go to ``<out>/<table>.csv`` and the manifest
    to ``<out>/<experiment>.manifest.json``.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    cfg = config.resolved()
    seeds = trial_seeds(cfg.seed, cfg.trials)
    digest = cfg.digest()
    t0 = time.perf_counter()
    tables, summary = EXPERIMENTS[cfg.experiment][0](cfg, seeds)
    wall = time.perf_counter() - t0
    manifest = RunManifest(dataclasses.asdict(cfg), digest, seeds, __version__, wall, {}, summary)
    if write:
        out = Path(cfg.out)
        for tab in tables:
            path = emit_csv(tab, out / f"{tab.name}.csv", digest)
            manifest.outputs[str(path)] = hashlib.sha256(path.read_bytes()).hexdigest()
        (out / f"{cfg.experiment}.manifest.json").write_text(manifest.to_json())
    return manifest, tables
