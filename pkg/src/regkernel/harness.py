"""Experiment runner: flat-file configs, seeded trials, CSV/JSON reports.

A config file is a flat list of ``key = value`` lines.  ``run`` validates the
parameter window, executes the experiment's trials with per-trial derived
seeds, and writes three files into the output directory:

* ``manifest.json`` — inputs, library versions, derived constants, and the
  run timestamp (the only field that differs between identical reruns);
* ``trials.csv`` — one row per trial (or per trial item, e.g. eigenvector);
* ``aggregate.json`` — summary statistics and pass/fail flags.

The exit status is nonzero exactly when a deterministic invariant fails in
some trial.  Statistical checks (chi-square, TV distance, Monte-Carlo
frequencies) record their verdict in ``aggregate.json`` but do not flip the
exit status.  Worker count for trial-level parallelism comes from the
``REGKERNEL_WORKERS`` environment variable (default 1); results are written
in trial order either way, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import datetime
import functools
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import scipy.stats

from . import __version__
from .decomposition import (
    C_K_DEFAULT,
    C_P_DEFAULT,
    CoverFailure,
    cover_witness,
    find_separated_pair,
    height_dichotomy,
)
from .ell_decomp import EllDecomposition, class_stats, decompose, decompose_stats, k_approx
from .estimators import compute_bundle, is_standard, project_Q, trivial_bound_constant
from .graph_core import RegularMatrix, RowMask, circulant
from .graph_stats import check_omega, deflated_norm_bracket, wilson_interval
from .sampler import (
    enumerate_all,
    level_value_vector,
    sample_mcmc,
    sample_multigraph,
    sample_regular,
    sample_uniform,
    sample_Z,
    simple_probability,
)
from .spectral import delocalization_census
from .taxonomy import InvalidWindow, TaxonomyParams, classify, decay_check, derive_params

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "KINDS",
    "WORKERS_ENV",
    "parse_config",
    "parse_config_text",
    "run",
    "validate",
    "worker_count",
]

SCHEMA_VERSION = 1
WORKERS_ENV = "REGKERNEL_WORKERS"

KINDS = (
    "uniformity",
    "expansion",
    "deflated-norm",
    "taxonomy-census",
    "ell-fuzz",
    "estimator-identities",
    "z-equivalence",
    "cover",
    "delocalization",
)


class ConfigError(ValueError):
    """Configuration problem detected before any compute."""


# --------------------------------------------------------------- config


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: kind, sizes, seeds, and kind-specific options."""

    kind: str
    n: int
    d: int
    trials: int
    seed: int = 0
    L: int = 1
    out_dir: str = "runs/out"
    row_mask: str = "full"
    z_grid: str = "default"
    overrides: Mapping = field(default_factory=dict)
    options: Mapping = field(default_factory=dict)

    def opt(self, key: str):
        return self.options[key]


# per-kind option registry: name -> (type tag, default, optional choice set)
_BASE_KEYS = {"kind", "n", "d", "L", "trials", "seed", "out_dir", "K", "z_grid"}

_OPTIONS: dict = {
    "uniformity": {
        "method": ("str", "rejection", ("rejection", "mcmc")),
        "mcmc_steps": ("int", 1000, None),
        "attempt_budget": ("int", 10000, None),
        "p_floor": ("float", 1e-3, None),
    },
    "expansion": {
        "eps": ("float", 0.3, None),
        "k_exh": ("int", 2, None),
        "omega_samples": ("int", 500, None),
        "norm_factor": ("float", 3.0, None),
        "norm_tol": ("float", 1e-6, None),
        "burn_factor": ("int", 10, None),
        "sample_method": ("str", "auto", ("auto", "rejection", "mcmc")),
    },
    "deflated-norm": {
        "norm_factor": ("float", 3.0, None),
        "norm_tol": ("float", 1e-6, None),
        "burn_factor": ("int", 10, None),
        "sample_method": ("str", "auto", ("auto", "rejection", "mcmc")),
    },
    "taxonomy-census": {
        "families": ("str", "uniform,two-lump,heavy,near-constant,steep,sparse", None),
    },
    "ell-fuzz": {
        "n_min": ("int", 8, None),
        "k_max": ("int", 0, None),  # 0 -> d**3
        "complex_fraction": ("float", 0.5, None),
    },
    "estimator-identities": {
        "k": ("int", 0, None),  # 0 -> d**2
        "c_row": ("float", 0.1, None),
        "c_two_sided": ("float", 0.1, None),
        "c_const": ("float", 16.0, None),
    },
    "z-equivalence": {
        "mode": ("str", "surrogate", ("surrogate", "conditional")),
        "tv_bound": ("float", 0.05, None),
    },
    "cover": {
        "v": ("int", 8, None),
        "c_K": ("float", C_K_DEFAULT, None),
        "c_P": ("float", C_P_DEFAULT, None),
        "profile_lo": ("float", 0.8, None),
        "profile_hi": ("float", 1.6, None),
        "min_n": ("int", 480000, None),
    },
    "delocalization": {
        "rho": ("str", "auto", None),  # float literal or "auto" = n^-0.3
        "delta": ("str", "auto", None),  # float literal or "auto" = 8 ln^2 d / ln n
        "tol": ("float", 1e-9, None),
        "q": ("int", 1, None),
        "burn_factor": ("int", 10, None),
        "sample_method": ("str", "auto", ("auto", "rejection", "mcmc")),
    },
}


def _coerce(tag: str, key: str, raw: str):
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"option {key!r}: cannot parse {raw!r} as {tag}") from exc


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` lines (``#`` starts a comment line)."""
    pairs: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value

    kind = pairs.pop("kind", None)
    if kind is None:
        raise ConfigError("missing required key 'kind'")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")

    def take_int(key, default=None):
        if key in pairs:
            return _coerce("int", key, pairs.pop(key))
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default

    n = take_int("n")
    d = take_int("d")
    trials = take_int("trials")
    seed = take_int("seed", 0)
    L = take_int("L", 1)
    out_dir = pairs.pop("out_dir", "runs/" + kind)
    row_mask = pairs.pop("K", "full")
    z_grid = pairs.pop("z_grid", "default")

    overrides = {}
    for key in [k for k in pairs if k.startswith("override.")]:
        overrides[key[len("override.") :]] = pairs.pop(key)

    registry = _OPTIONS[kind]
    options = {}
    for key, (tag, default, choices) in registry.items():
        if key in pairs:
            options[key] = _coerce(tag, key, pairs.pop(key))
        else:
            options[key] = default
        if choices is not None and options[key] not in choices:
            raise ConfigError(f"option {key!r}: {options[key]!r} not in {choices}")
    if pairs:
        raise ConfigError(f"unknown keys for kind {kind!r}: {', '.join(sorted(pairs))}")

    return ExperimentConfig(
        kind=kind,
        n=n,
        d=d,
        trials=trials,
        seed=seed,
        L=L,
        out_dir=out_dir,
        row_mask=row_mask,
        z_grid=z_grid,
        overrides=overrides,
        options=options,
    )


def parse_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())


def _parse_row_mask(spec: str, n: int) -> RowMask:
    if spec == "full":
        return RowMask.full(n)
    try:
        if ":" in spec:
            lo_s, hi_s = spec.split(":", 1)
            rows = np.arange(int(lo_s), int(hi_s), dtype=np.int64)
        else:
            rows = np.array([int(part) for part in spec.split(",")], dtype=np.int64)
        return RowMask(n, rows)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad K row-mask spec {spec!r}: {exc}") from exc


def _parse_z_grid(spec: str):
    if spec == "default":
        return None
    try:
        return tuple(complex(part.strip().replace("i", "j")) for part in spec.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad z_grid spec {spec!r}: {exc}") from exc


@functools.lru_cache(maxsize=16)
def _cached_params(n: int, d: int, L: int, override_items: tuple) -> TaxonomyParams:
    return derive_params(n, d, L, overrides=dict(override_items))


def _params_for(cfg: ExperimentConfig) -> TaxonomyParams:
    try:
        return _cached_params(cfg.n, cfg.d, cfg.L, tuple(sorted(cfg.overrides.items())))
    except (InvalidWindow, ValueError) as exc:
        raise ConfigError(f"parameter window: {exc}") from exc


def _deloc_rho_delta(cfg: ExperimentConfig) -> tuple:
    raw_rho, raw_delta = cfg.opt("rho"), cfg.opt("delta")
    rho = cfg.n**-0.3 if raw_rho == "auto" else _coerce("float", "rho", raw_rho)
    if raw_delta == "auto":
        delta = 8.0 * math.log(cfg.d) ** 2 / math.log(cfg.n)
    else:
        delta = _coerce("float", "delta", raw_delta)
    if rho <= 0 or delta <= 0:
        raise ConfigError("rho and delta must be positive")
    return rho, delta


def validate(cfg: ExperimentConfig) -> dict:
    """Check every module precondition the run would hit; return derived
    constants for the manifest.  Raises ConfigError without computing."""
    if cfg.trials < 0:
        raise ConfigError("trials must be >= 0")
    if cfg.n < 1 or cfg.d < 1 or cfg.d > cfg.n:
        raise ConfigError(f"need 1 <= d <= n, got n={cfg.n}, d={cfg.d}")
    _parse_row_mask(cfg.row_mask, cfg.n)
    _parse_z_grid(cfg.z_grid)
    derived: dict = {"schema": SCHEMA_VERSION}

    if cfg.kind == "uniformity":
        if cfg.n > 6:
            raise ConfigError("uniformity needs n <= 6 (exhaustive enumeration)")
        if cfg.opt("mcmc_steps") < 1 or cfg.opt("attempt_budget") < 1:
            raise ConfigError("mcmc_steps and attempt_budget must be positive")
    elif cfg.kind in ("expansion", "deflated-norm"):
        if not 0 < cfg.opt("norm_factor"):
            raise ConfigError("norm_factor must be positive")
        if cfg.kind == "expansion" and not 0 < cfg.opt("eps") < 1:
            raise ConfigError("eps must lie in (0, 1)")
        derived["norm_bound"] = cfg.opt("norm_factor") * math.sqrt(cfg.d)
    elif cfg.kind == "taxonomy-census":
        P = _params_for(cfg)
        derived["params"] = P.describe()
        families = [f.strip() for f in cfg.opt("families").split(",") if f.strip()]
        unknown = set(families) - set(_CENSUS_FAMILIES)
        if not families or unknown:
            raise ConfigError(f"unknown census families: {sorted(unknown)}")
    elif cfg.kind == "ell-fuzz":
        if cfg.opt("n_min") < 1 or cfg.opt("n_min") > cfg.n:
            raise ConfigError("need 1 <= n_min <= n")
        if cfg.opt("k_max") < 0:
            raise ConfigError("k_max must be >= 0 (0 means d^3)")
        if not 0 <= cfg.opt("complex_fraction") <= 1:
            raise ConfigError("complex_fraction must lie in [0, 1]")
        derived["k_max"] = cfg.opt("k_max") or cfg.d**3
    elif cfg.kind == "estimator-identities":
        if cfg.opt("k") < 0:
            raise ConfigError("k must be >= 0 (0 means d^2)")
        derived["k"] = cfg.opt("k") or cfg.d**2
    elif cfg.kind == "z-equivalence":
        want = (3, 1) if cfg.opt("mode") == "surrogate" else (4, 2)
        if (cfg.n, cfg.d) != want:
            raise ConfigError(
                f"z-equivalence mode {cfg.opt('mode')!r} runs on the fixed "
                f"(n, d) = {want} instance"
            )
        if not 0 < cfg.opt("tv_bound") < 1:
            raise ConfigError("tv_bound must lie in (0, 1)")
    elif cfg.kind == "cover":
        if cfg.n < cfg.opt("min_n"):
            raise ConfigError(
                f"cover needs n >= {cfg.opt('min_n')} (nondegenerate thresholds)"
            )
        if cfg.opt("v") < 5:
            raise ConfigError("v must be at least 5")
        if cfg.opt("c_K") < 0 or not 0 < cfg.opt("c_P") < 1:
            raise ConfigError("need c_K >= 0 and 0 < c_P < 1")
        if not 0 < cfg.opt("profile_lo") < cfg.opt("profile_hi"):
            raise ConfigError("need 0 < profile_lo < profile_hi")
        P = _params_for(cfg)
        if P.n3 < 400:
            raise ConfigError("cover needs n3 >= 400 (theorem-proof nondegeneracy)")
        derived["params"] = P.describe()
        derived["k_separation"] = math.ceil(5 / P.theta0)
        derived["k_heights"] = math.ceil(2 * cfg.d / P.theta0)
    elif cfg.kind == "delocalization":
        P = _params_for(cfg)
        derived["params"] = P.describe()
        rho, delta = _deloc_rho_delta(cfg)
        derived["rho"], derived["delta"] = rho, delta
        if cfg.opt("q") < 1:
            raise ConfigError("q must be >= 1")
    return derived


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from exc
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return workers


# --------------------------------------------------------------- trials


def _map_trials(fn: Callable, cfg: ExperimentConfig) -> list:
    """Run fn(cfg, t) for t in range(trials), in order, possibly in parallel."""
    trials = cfg.trials
    workers = min(worker_count(), max(trials, 1))
    bound = functools.partial(fn, cfg)
    if workers == 1 or trials <= 1:
        return [bound(t) for t in range(trials)]
    chunk = max(1, trials // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(bound, range(trials), chunksize=chunk))


def _rng_for(cfg: ExperimentConfig, trial: int, tag: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([cfg.seed, trial, tag]))
    )


# ------------------------------------------------------------ uniformity


def _uniformity_trial(cfg: ExperimentConfig, t: int) -> dict:
    if cfg.opt("method") == "rejection":
        M = sample_uniform(cfg.n, cfg.d, [cfg.seed, t], cfg.opt("attempt_budget"))
    else:
        M = sample_mcmc(circulant(cfg.n, cfg.d), cfg.opt("mcmc_steps"), [cfg.seed, t])
    return {"trial": t, "matrix_key": M.key().hex()}


def _run_uniformity(cfg: ExperimentConfig):
    rows = _map_trials(_uniformity_trial, cfg)
    index = {M.key().hex(): i for i, M in enumerate(enumerate_all(cfg.n, cfg.d))}
    counts = np.zeros(len(index), dtype=np.int64)
    for row in rows:
        counts[index[row["matrix_key"]]] += 1
    aggregate = {
        "class_count": len(index),
        "method": cfg.opt("method"),
        "counts_min": int(counts.min()) if cfg.trials else 0,
        "counts_max": int(counts.max()) if cfg.trials else 0,
    }
    if cfg.trials:
        expected = cfg.trials / len(index)
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        p_value = float(scipy.stats.chi2.sf(chi2, len(index) - 1))
        aggregate.update(
            chi2=chi2,
            dof=len(index) - 1,
            p_value=p_value,
            p_floor=cfg.opt("p_floor"),
            holds=bool(p_value > cfg.opt("p_floor")),
        )
    return ["trial", "matrix_key"], rows, aggregate, 0


# ------------------------------------------------- expansion / deflated


def _sample_matrix(cfg: ExperimentConfig, t: int) -> RegularMatrix:
    return sample_regular(
        cfg.n,
        cfg.d,
        [cfg.seed, t],
        method=cfg.opt("sample_method"),
        burn_factor=cfg.opt("burn_factor"),
    )


def _expansion_trial(cfg: ExperimentConfig, t: int) -> dict:
    M = _sample_matrix(cfg, t)
    seed = int(np.random.SeedSequence([cfg.seed, t, 0xE5]).generate_state(1)[0])
    omega = check_omega(
        M,
        cfg.opt("k_exh"),
        cfg.opt("eps"),
        k_exh=cfg.opt("k_exh"),
        samples=cfg.opt("omega_samples"),
        seed=seed,
    )
    bracket = deflated_norm_bracket(M, tol=cfg.opt("norm_tol"), seed=seed)
    bound = cfg.opt("norm_factor") * math.sqrt(cfg.d)
    return {
        "trial": t,
        "omega_holds": omega.holds,
        "omega_frequency": omega.frequency,
        "deflated_norm": bracket.estimate,
        "norm_converged": bracket.converged,
        "norm_ok": bool(bracket.estimate <= bound),
    }


def _run_expansion(cfg: ExperimentConfig):
    rows = _map_trials(_expansion_trial, cfg)
    bound = cfg.opt("norm_factor") * math.sqrt(cfg.d)
    omega_pass = sum(r["omega_holds"] for r in rows)
    norm_pass = sum(r["norm_ok"] for r in rows)
    circ = deflated_norm_bracket(circulant(cfg.n, cfg.d), tol=cfg.opt("norm_tol"))
    aggregate = {
        "norm_bound": bound,
        "omega_pass_fraction": omega_pass / cfg.trials if cfg.trials else None,
        "norm_pass_fraction": norm_pass / cfg.trials if cfg.trials else None,
        "circulant_norm": circ.estimate,
        "circulant_exceeds_bound": bool(circ.estimate > bound),
        "holds": bool(
            cfg.trials == 0 or (omega_pass == cfg.trials and norm_pass >= 0.95 * cfg.trials)
        ),
    }
    fields = [
        "trial",
        "omega_holds",
        "omega_frequency",
        "deflated_norm",
        "norm_converged",
        "norm_ok",
    ]
    return fields, rows, aggregate, 0


def _deflated_trial(cfg: ExperimentConfig, t: int) -> dict:
    M = _sample_matrix(cfg, t)
    seed = int(np.random.SeedSequence([cfg.seed, t, 0xDF]).generate_state(1)[0])
    bracket = deflated_norm_bracket(M, tol=cfg.opt("norm_tol"), seed=seed)
    bound = cfg.opt("norm_factor") * math.sqrt(cfg.d)
    return {
        "trial": t,
        "lower": bracket.lower,
        "estimate": bracket.estimate,
        "upper": bracket.upper,
        "converged": bracket.converged,
        "norm_ok": bool(bracket.estimate <= bound),
    }


def _run_deflated(cfg: ExperimentConfig):
    rows = _map_trials(_deflated_trial, cfg)
    estimates = np.array([r["estimate"] for r in rows]) if rows else np.zeros(0)
    bound = cfg.opt("norm_factor") * math.sqrt(cfg.d)
    aggregate = {
        "norm_bound": bound,
        "pass_fraction": float(np.mean(estimates <= bound)) if rows else None,
        "median": float(np.median(estimates)) if rows else None,
        "max": float(estimates.max()) if rows else None,
    }
    fields = ["trial", "lower", "estimate", "upper", "converged", "norm_ok"]
    return fields, rows, aggregate, 0


# -------------------------------------------------------- taxonomy census


def _gen_census_vector(family: str, rng: np.random.Generator, P: TaxonomyParams):
    n = P.n
    if family == "uniform":
        return rng.uniform(0.5, 1.5, n)
    if family == "two-lump":
        lump = rng.uniform(1.0, 2.0)
        x = np.concatenate(
            [rng.uniform(0.5, 0.7, n - n // 3), lump + rng.uniform(0, 0.2, n // 3)]
        )
        return rng.permutation(x)
    if family == "heavy":
        return rng.pareto(1.5, n) + 0.1
    if family == "near-constant":
        return 1.0 + rng.normal(0, P.theta0 / 10, n)
    if family == "steep":
        x = rng.uniform(0.5, 1.5, n)
        x[rng.integers(0, n)] = 10.0 * n**3
        return x
    if family == "sparse":
        x = np.zeros(n)
        head = max(P.n3 // 2, 1)
        x[rng.choice(n, size=head, replace=False)] = rng.uniform(1, 2, head)
        return x
    raise ConfigError(f"unknown census family {family!r}")


_CENSUS_FAMILIES = ("uniform", "two-lump", "heavy", "near-constant", "steep", "sparse")


def _census_trial(cfg: ExperimentConfig, t: int) -> dict:
    P = _params_for(cfg)
    families = [f.strip() for f in cfg.opt("families").split(",") if f.strip()]
    family = families[t % len(families)]
    x = _gen_census_vector(family, _rng_for(cfg, t, 0xCE), P)
    verdict = classify(x, P)
    decay_violations = 0
    if verdict.steep_class == "none" and not verdict.degenerate_tail:
        decay_violations = len(decay_check(x, P))
    return {
        "trial": t,
        "family": family,
        "steep_class": verdict.steep_class,
        "almost_constant": verdict.almost_constant,
        "gradual": verdict.gradual,
        "degenerate_tail": verdict.degenerate_tail,
        "decay_violations": decay_violations,
    }


def _run_census(cfg: ExperimentConfig):
    rows = _map_trials(_census_trial, cfg)
    hard = sum(r["decay_violations"] for r in rows)
    tally: dict = {}
    for r in rows:
        label = (
            "steep:" + r["steep_class"]
            if r["steep_class"] != "none"
            else "degenerate-tail"
            if r["degenerate_tail"]
            else "almost-constant"
            if r["almost_constant"]
            else "gradual"
        )
        tally[label] = tally.get(label, 0) + 1
    aggregate = {
        "class_fractions": {k: v / cfg.trials for k, v in sorted(tally.items())}
        if cfg.trials
        else {},
        "decay_violations": hard,
        "holds": hard == 0,
    }
    fields = [
        "trial",
        "family",
        "steep_class",
        "almost_constant",
        "gradual",
        "degenerate_tail",
        "decay_violations",
    ]
    return fields, rows, aggregate, hard


# ------------------------------------------------------------- ell fuzz


def _ell_violations(dec: EllDecomposition) -> list:
    """Deterministic structure checks; returns human-readable violations."""
    bad = []
    n, d, k = dec.n, dec.d, dec.k
    # the level sets partition [n]
    blocks = [dec.level_indices(r) for r in range(dec.ls_start.size)]
    seen = np.sort(np.concatenate(blocks)) if blocks else np.zeros(0, dtype=np.int64)
    if not np.array_equal(seen, np.arange(n)):
        bad.append("level sets do not partition the index set")
    # per-level size window [2^(j-1), 2^(j+1)) and height/size identities
    sizes, orders = dec.ls_len, dec.ls_order
    low = np.where(orders > 0, 2 ** np.maximum(orders - 1, 0), 1)
    if np.any(sizes < low) or np.any(sizes >= 2 ** (orders + 1)):
        bad.append("level-set size outside its order window")
    heights = np.bincount(dec.ls_part, minlength=dec.m)
    if not np.array_equal(heights, dec.part_heights):
        bad.append("part height != number of level sets")
    sizes_by_part = np.bincount(dec.ls_part, weights=sizes, minlength=dec.m)
    if not np.array_equal(sizes_by_part.astype(np.int64), dec.part_sizes):
        bad.append("part cardinality != sum of level-set sizes")
    # cumulative per-step heights never increase with the step index
    stats = class_stats(dec)
    totals = [s.hs + s.hr for s in stats]
    if any(a < b for a, b in zip(totals, totals[1:])):
        bad.append("per-step total height increased")
    # spread parts: pairwise level-value separation >= d/k, exactly
    for q in np.flatnonzero(dec.part_is_spread):
        rows = dec.part_rows(q)
        if rows.size < 2:
            bad.append(f"spread part {q} has a single level")
            continue
        re = dec.ls_re[rows].astype(object)
        im = dec.ls_im[rows].astype(object)
        dre = re[:, None] - re[None, :]
        dim = im[:, None] - im[None, :]
        gap_sq = dre * dre + dim * dim
        np.fill_diagonal(gap_sq, d * d)
        if gap_sq.min() < d * d:
            bad.append(f"spread part {q} has levels closer than d/k")
    if dec.m > 3 * math.log(max(n, 2)) + 4:
        bad.append("part count exceeds 3 ln n + 4")
    return bad


def _ell_fuzz_trial(cfg: ExperimentConfig, t: int) -> dict:
    rng = _rng_for(cfg, t, 0xE1)
    n_t = int(rng.integers(cfg.opt("n_min"), cfg.n + 1))
    k_max = cfg.opt("k_max") or cfg.d**3
    k_t = int(rng.integers(1, k_max + 1))
    if rng.random() < cfg.opt("complex_fraction"):
        x = rng.integers(0, 4 * k_t, n_t) / k_t + 1j * rng.integers(0, 4 * k_t, n_t) / k_t
    else:
        x = rng.uniform(0, 4.0, n_t)
    y = k_approx(x, k_t)
    dec = decompose(y, cfg.d)
    violations = _ell_violations(dec)
    if [tuple(s) for s in decompose_stats(y, cfg.d)] != [
        tuple(s) for s in class_stats(dec)
    ]:
        violations.append("decompose_stats disagrees with the built decomposition")
    return {
        "trial": t,
        "n": n_t,
        "k": k_t,
        "parts": dec.m,
        "spread_total": dec.spread_total,
        "violations": "; ".join(violations),
    }


def _run_ell_fuzz(cfg: ExperimentConfig):
    rows = _map_trials(_ell_fuzz_trial, cfg)
    hard = sum(bool(r["violations"]) for r in rows)
    aggregate = {
        "violation_trials": hard,
        "holds": hard == 0,
        "mean_parts": float(np.mean([r["parts"] for r in rows])) if rows else None,
    }
    fields = ["trial", "n", "k", "parts", "spread_total", "violations"]
    return fields, rows, aggregate, hard


# -------------------------------------------------- estimator identities


def _estimator_trial(cfg: ExperimentConfig, t: int) -> dict:
    rng = _rng_for(cfg, t, 0xE57)
    k = cfg.opt("k") or cfg.d**2
    y = rng.integers(0, k, cfg.n) / k
    dec = decompose(k_approx(y, k), cfg.d)
    M = sample_regular(cfg.n, cfg.d, [cfg.seed, t, 0x9A])
    Q = project_Q(M, dec)
    violations = []
    if not np.all(Q.values.sum(axis=1) == cfg.d):
        violations.append("row sums of Q differ from d")
    if not np.all(Q.values.sum(axis=0) == cfg.d * dec.part_sizes):
        violations.append("column sums of Q differ from d * part size")
    bundle = compute_bundle(dec, Q)
    verdict = is_standard(Q, cfg.opt("c_row"), cfg.opt("c_two_sided"), decomp=dec)
    eta_floor = None
    if verdict.ok:
        cut = sum(min(len(b.W1), len(b.W2)) for b in bundle.buckets.values())
        eta_floor = cfg.opt("c_row") ** 2 * cut
        if bundle.eta < eta_floor - 1e-9:
            violations.append("eta fell below the balanced-cut floor")
    C = trivial_bound_constant(bundle)
    if C > cfg.opt("c_const"):
        violations.append(f"measured constant {C:.3f} exceeds the budget")
    return {
        "trial": t,
        "parts": dec.m,
        "standard": verdict.ok,
        "eta": bundle.eta,
        "eta_floor": eta_floor if eta_floor is not None else "",
        "measured_constant": C,
        "log_sb_sum": float(bundle.log_sb.sum()),
        "log_te_sum": float(bundle.log_te.sum()),
        "violations": "; ".join(violations),
    }


def _run_estimators(cfg: ExperimentConfig):
    rows = _map_trials(_estimator_trial, cfg)
    hard = sum(bool(r["violations"]) for r in rows)
    consts = [r["measured_constant"] for r in rows]
    aggregate = {
        "violation_trials": hard,
        "holds": hard == 0,
        "standard_fraction": float(np.mean([r["standard"] for r in rows])) if rows else None,
        "max_measured_constant": max(consts) if consts else None,
    }
    fields = [
        "trial",
        "parts",
        "standard",
        "eta",
        "eta_floor",
        "measured_constant",
        "log_sb_sum",
        "log_te_sum",
        "violations",
    ]
    return fields, rows, aggregate, hard


# ---------------------------------------------------------- z equivalence


@functools.lru_cache(maxsize=2)
def _z_instance(mode: str):
    if mode == "surrogate":
        # one part, two levels (sizes 2 and 1, values 2 and 1), d = 1
        dec = EllDecomposition.from_parts(
            6, 1, 3, [("regular", 1, [(12, 0, [0, 1]), (6, 0, [2])])]
        )
        Q = np.ones((3, 1), dtype=np.int64)
    else:
        # one flat part covering all four columns, d = 2
        dec = EllDecomposition.from_parts(
            6, 2, 4, [("regular", 2, [(6, 0, np.arange(4))])]
        )
        Q = np.full((4, 1), 2, dtype=np.int64)
    return dec, Q


def _z_key(values: np.ndarray, k: int) -> str:
    nums = np.rint(np.asarray(values).real * k).astype(np.int64)
    return "|".join(str(int(v)) for v in nums)


def _z_trial(cfg: ExperimentConfig, t: int) -> dict:
    dec, Q = _z_instance(cfg.opt("mode"))
    if cfg.opt("mode") == "surrogate":
        K = _parse_row_mask(cfg.row_mask, cfg.n)
        draw = sample_Z(dec, Q, K, [cfg.seed, t, 0x5A])
        g = sample_multigraph(dec, Q, [cfg.seed, t, 0xA5])
        applied = g.apply(level_value_vector(dec))[K.rows]
        return {
            "trial": t,
            "z_key": _z_key(draw.Z, dec.k),
            "z_exact": draw.exact_count_flag,
            "a_key": _z_key(applied, dec.k),
            "a_simple": g.is_simple,
        }
    g = sample_multigraph(dec, Q, [cfg.seed, t, 0xA5])
    return {
        "trial": t,
        "simple": g.is_simple,
        "matrix_key": g.to_regular().key().hex() if g.is_simple else "",
    }


def _run_z_equivalence(cfg: ExperimentConfig):
    rows = _map_trials(_z_trial, cfg)
    bound = cfg.opt("tv_bound")
    if cfg.opt("mode") == "surrogate":
        z_tally: dict = {}
        a_tally: dict = {}
        z_kept = a_kept = 0
        for r in rows:
            if r["z_exact"]:
                z_kept += 1
                z_tally[r["z_key"]] = z_tally.get(r["z_key"], 0) + 1
            if r["a_simple"]:
                a_kept += 1
                a_tally[r["a_key"]] = a_tally.get(r["a_key"], 0) + 1
        support = set(z_tally) | set(a_tally)
        tv = (
            0.5
            * sum(
                abs(z_tally.get(s, 0) / z_kept - a_tally.get(s, 0) / a_kept)
                for s in support
            )
            if z_kept and a_kept
            else None
        )
        aggregate = {
            "mode": "surrogate",
            "tv_distance": tv,
            "tv_bound": bound,
            "kept_surrogate": z_kept,
            "kept_matrix": a_kept,
            "support_size": len(support),
            "holds": bool(tv is not None and tv < bound),
        }
        fields = ["trial", "z_key", "z_exact", "a_key", "a_simple"]
        return fields, rows, aggregate, 0
    index = {M.key().hex(): i for i, M in enumerate(enumerate_all(cfg.n, cfg.d))}
    counts = np.zeros(len(index), dtype=np.int64)
    simple = 0
    for r in rows:
        if r["simple"]:
            simple += 1
            counts[index[r["matrix_key"]]] += 1
    _, Q = _z_instance("conditional")
    exact_simple = simple_probability(len(index), cfg.n, cfg.d, Q)
    tv = (
        0.5 * float(np.abs(counts / simple - 1 / len(index)).sum()) if simple else None
    )
    aggregate = {
        "mode": "conditional",
        "class_count": len(index),
        "tv_distance": tv,
        "tv_bound": bound,
        "simple_fraction": simple / cfg.trials if cfg.trials else None,
        "exact_simple_probability": exact_simple,
        "holds": bool(tv is not None and tv < bound),
    }
    fields = ["trial", "simple", "matrix_key"]
    return fields, rows, aggregate, 0


# ----------------------------------------------------------------- cover


_COVER_FAMILIES = ("uniform", "two-lump", "planted-cluster")


def _cover_vector(cfg: ExperimentConfig, P: TaxonomyParams, t: int) -> np.ndarray:
    """Sorted gradual profile; ascending order lets decompose skip its sort."""
    rng = _rng_for(cfg, t, 0xC0)
    lo, hi = cfg.opt("profile_lo"), cfg.opt("profile_hi")
    family = _COVER_FAMILIES[t % len(_COVER_FAMILIES)]
    if family == "uniform":
        x = rng.uniform(lo, hi, cfg.n)
    elif family == "two-lump":
        mid = 0.5 * (lo + hi)
        span = 0.25 * (hi - lo)
        half = cfg.n // 2
        x = np.concatenate(
            [rng.uniform(lo, lo + span, half), rng.uniform(hi - span, hi, cfg.n - half)]
        )
    else:
        body = rng.uniform(lo, hi, cfg.n - cfg.n // 10)
        x = np.concatenate([body, np.full(cfg.n // 10, rng.uniform(lo, hi))])
    x.sort()
    x /= x[cfg.n - P.n3]
    return x


def _cover_trial(cfg: ExperimentConfig, t: int) -> dict:
    P = _params_for(cfg)
    x = _cover_vector(cfg, P, t)
    k_sep = math.ceil(5 / P.theta0)
    k_heights = math.ceil(2 * cfg.d / P.theta0)
    failures = []
    branch = u = card = None
    try:
        w = cover_witness(x, cfg.opt("v"), (cfg.opt("c_K"), cfg.opt("c_P")), P)
        branch, u, card = w.branch, w.u, w.certificate.cardinality
    except CoverFailure:
        failures.append("no cover witness")
    sep_axis = sep_gap = None
    try:
        sep = find_separated_pair(x, k_sep, P)
        sep_axis, sep_gap = sep.axis, sep.gap
        if min(sep.I.size, sep.J.size) * 4 < P.n3 or sep.gap < P.theta0 / 2:
            failures.append("separated pair below its guarantees")
    except RuntimeError:
        failures.append("separated pair not found")
    hd = height_dichotomy(x, k_heights, P)
    if not hd.holds:
        failures.append("height dichotomy failed")
    return {
        "trial": t,
        "family": _COVER_FAMILIES[t % len(_COVER_FAMILIES)],
        "branch": branch if branch is not None else "",
        "u": u if u is not None else "",
        "witness_cardinality": card if card is not None else "",
        "sep_axis": sep_axis or "",
        "sep_gap": sep_gap if sep_gap is not None else "",
        "tall_holds": hd.tall_holds,
        "spread_holds": hd.spread_holds,
        "failures": "; ".join(failures),
    }


def _run_cover(cfg: ExperimentConfig):
    rows = _map_trials(_cover_trial, cfg)
    hard = sum(bool(r["failures"]) for r in rows)
    branches: dict = {}
    for r in rows:
        if r["branch"]:
            branches[r["branch"]] = branches.get(r["branch"], 0) + 1
    aggregate = {
        "failed_trials": hard,
        "holds": hard == 0,
        "branch_counts": dict(sorted(branches.items())),
    }
    fields = [
        "trial",
        "family",
        "branch",
        "u",
        "witness_cardinality",
        "sep_axis",
        "sep_gap",
        "tall_holds",
        "spread_holds",
        "failures",
    ]
    return fields, rows, aggregate, hard


# -------------------------------------------------------- delocalization


def _deloc_trial(cfg: ExperimentConfig, t: int) -> list:
    P = _params_for(cfg)
    rho, delta = _deloc_rho_delta(cfg)
    M = _sample_matrix(cfg, t)
    report = delocalization_census(M, rho, delta, P, tol=cfg.opt("tol"), q=cfg.opt("q"))
    rows = []
    for row in report.rows:
        rows.append(
            {
                "trial": t,
                "index": row.index,
                "eig_re": float(row.eigenvalue.real),
                "eig_im": float(row.eigenvalue.imag),
                "residual": row.residual,
                "certified": row.certified,
                "multiplicity": row.multiplicity,
                "branch": row.branch,
                "ball_lower": row.verdict.ball_lower,
                "ball_upper": row.verdict.ball_upper,
                "ball_limit": row.verdict.ball_limit,
                "ball_ok": row.verdict.ball_ok if row.verdict.ball_ok is not None else "",
                "normalized_ball_mass": row.normalized_ball_mass,
            }
        )
    return rows


def _run_delocalization(cfg: ExperimentConfig):
    nested = _map_trials(_deloc_trial, cfg)
    rows = [row for per_trial in nested for row in per_trial]
    branch_tally: dict = {}
    masses = []
    per_matrix_all_pass = []
    for per_trial in nested:
        for row in per_trial:
            branch_tally[row["branch"]] = branch_tally.get(row["branch"], 0) + 1
            masses.append(row["normalized_ball_mass"])
        per_matrix_all_pass.append(all(r["ball_ok"] is True for r in per_trial))
    aggregate = {
        "eigenvector_rows": len(rows),
        "branch_fractions": {
            k: v / len(rows) for k, v in sorted(branch_tally.items())
        }
        if rows
        else {},
        "median_normalized_ball_mass": float(np.median(masses)) if masses else None,
        "all_pass_fraction": float(np.mean(per_matrix_all_pass)) if nested else None,
    }
    fields = [
        "trial",
        "index",
        "eig_re",
        "eig_im",
        "residual",
        "certified",
        "multiplicity",
        "branch",
        "ball_lower",
        "ball_upper",
        "ball_limit",
        "ball_ok",
        "normalized_ball_mass",
    ]
    return fields, rows, aggregate, 0


_EXPERIMENTS = {
    "uniformity": _run_uniformity,
    "expansion": _run_expansion,
    "deflated-norm": _run_deflated,
    "taxonomy-census": _run_census,
    "ell-fuzz": _run_ell_fuzz,
    "estimator-identities": _run_estimators,
    "z-equivalence": _run_z_equivalence,
    "cover": _run_cover,
    "delocalization": _run_delocalization,
}


# -------------------------------------------------------------- reports


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def _write_reports(cfg: ExperimentConfig, derived, fields, rows, aggregate, hard):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trials.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in fields])
    aggregate = dict(aggregate)
    aggregate.update(hard_failures=hard, exit_status=0 if hard == 0 else 1)
    (out / "aggregate.json").write_text(
        json.dumps(_jsonable(aggregate), sort_keys=True, indent=2) + "\n"
    )
    config_echo = {
        "kind": cfg.kind,
        "n": cfg.n,
        "d": cfg.d,
        "L": cfg.L,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "out_dir": cfg.out_dir,
        "K": cfg.row_mask,
        "z_grid": cfg.z_grid,
        "overrides": dict(cfg.overrides),
        "options": dict(cfg.options),
    }
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "bit_generator": "Philox",
        "workers": worker_count(),
        "config": config_echo,
        "config_sha256": hashlib.sha256(
            json.dumps(_jsonable(config_echo), sort_keys=True).encode()
        ).hexdigest(),
        "derived": derived,
        "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    (out / "manifest.json").write_text(
        json.dumps(_jsonable(manifest), sort_keys=True, indent=2) + "\n"
    )


def run(cfg: ExperimentConfig) -> int:
    """Validate, execute, and report one experiment; return the exit status."""
    derived = validate(cfg)
    fields, rows, aggregate, hard = _EXPERIMENTS[cfg.kind](cfg)
    _write_reports(cfg, derived, fields, rows, aggregate, hard)
    return 0 if hard == 0 else 1
