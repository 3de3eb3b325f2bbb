"""Experiment configuration: JSON schema, strict parsing, compiled-in presets.

Presets pin the exact parameterizations of the studied experiments so runs
cannot drift; every field can still be overridden with key=value paths.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .engine import TrialConfig
from .environments import (CostParams, MisspecifiedLinearEnv, NonstationaryMabEnv,
                           OralyticsZipEnv, SyntheticDosageEnv, load_population,
                           sample_population)
from .errors import ConfigurationError
from .estimators import EstimandSpec
from .policies import (Boltzmann, ContextualEpsGreedy, Featurization, FixedProb,
                       GaussianThompson, MabEpsilonGreedy)
from .rng import SeedSpec, derive_stream

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema_version", "preset", "n", "T", "update_every", "master_seed",
             "reps", "env", "policy", "estimand"}

_ENV_KEYS = {
    "nonstationary_mab": {"kind", "mu0", "deltas"},
    "misspecified_linear": {"kind", "alpha0", "alpha1"},
    "synthetic_dosage": {"kind", "alpha", "gamma", "rho", "noise_sd"},
    "oralytics_zip": {"kind", "population", "cost", "shrink_factor",
                      "shrink_check_interval", "window", "window_gamma", "quality_cap"},
}
_POLICY_KEYS = {
    "mab_epsilon_greedy": {"kind", "eps"},
    "gaussian_thompson": {"kind", "prior_mean", "prior_var", "noise_var"},
    "contextual_epsilon_greedy": {"kind", "eps", "ridge_lambda", "featurization"},
    "boltzmann": {"kind", "pi_min", "steepness", "ridge_lambda", "featurization"},
    "fixed_prob": {"kind", "p"},
}
_ESTIMAND_KEYS = {"kind", "target", "featurization", "action_interaction", "level"}
_POPULATION_KEYS = {"source", "pool_size", "pool_seed", "path"}
_COST_KEYS = {"xi1", "xi2", "b", "a1", "a2"}

DEFAULT_POOL_SEED = 20240611


def _reject_unknown(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {sorted(unknown)}; "
                                 f"allowed keys are {sorted(allowed)}")


def build_pilot_pool(pool_size: int = 9, pool_seed: int = DEFAULT_POOL_SEED) -> tuple:
    """Deterministic synthetic pilot pool; fixed across replications."""
    stream = derive_stream(SeedSpec(pool_seed, 0, "pilot_pool"))
    return tuple(sample_population("synthetic_prior", pool_size, stream))


def _build_env(section: dict):
    if "kind" not in section:
        raise ConfigurationError("env: missing required key 'kind'")
    kind = section["kind"]
    if kind not in _ENV_KEYS:
        raise ConfigurationError(f"env: unknown kind {kind!r}; "
                                 f"one of {sorted(_ENV_KEYS)}")
    _reject_unknown(section, _ENV_KEYS[kind], "env")
    if kind == "nonstationary_mab":
        return NonstationaryMabEnv(mu0=section.get("mu0", 0.0),
                                   deltas=tuple(section.get("deltas", (0.0, -0.25))))
    if kind == "misspecified_linear":
        return MisspecifiedLinearEnv(
            alpha0=tuple(section.get("alpha0", (0.1, 0.1, 0.0))),
            alpha1=tuple(section.get("alpha1", (1.0 / 3.0, -2.0, 2.0))))
    if kind == "synthetic_dosage":
        return SyntheticDosageEnv(
            alpha=tuple(section.get("alpha", (0.0, 1.0, 0.0))),
            gamma=section.get("gamma", 0.95),
            rho=section.get("rho", float(np.sqrt(0.5))),
            noise_sd=section.get("noise_sd", 1.0))
    pop_spec = section.get("population", {"source": "synthetic_prior"})
    _reject_unknown(pop_spec, _POPULATION_KEYS, "env.population")
    source = pop_spec.get("source", "synthetic_prior")
    if source == "synthetic_prior":
        pool = build_pilot_pool(pop_spec.get("pool_size", 9),
                                pop_spec.get("pool_seed", DEFAULT_POOL_SEED))
    elif source == "file":
        if "path" not in pop_spec:
            raise ConfigurationError("env.population: file source needs 'path'")
        pool = tuple(load_population(pop_spec["path"]))
    else:
        raise ConfigurationError(f"env.population: unknown source {source!r}")
    cost_spec = dict(section.get("cost", {}))
    _reject_unknown(cost_spec, _COST_KEYS, "env.cost")
    return OralyticsZipEnv(
        population=pool, cost=CostParams(**cost_spec),
        shrink_factor=section.get("shrink_factor", 0.5),
        shrink_check_interval=section.get("shrink_check_interval", 14),
        window=section.get("window", 14),
        window_gamma=section.get("window_gamma", 13.0 / 14.0),
        quality_cap=section.get("quality_cap", 180.0))


def _build_policy(section: dict):
    if "kind" not in section:
        raise ConfigurationError("policy: missing required key 'kind'")
    kind = section["kind"]
    if kind not in _POLICY_KEYS:
        raise ConfigurationError(f"policy: unknown kind {kind!r}; "
                                 f"one of {sorted(_POLICY_KEYS)}")
    _reject_unknown(section, _POLICY_KEYS[kind], "policy")
    if kind == "mab_epsilon_greedy":
        return MabEpsilonGreedy(eps=section.get("eps", 0.1))
    if kind == "gaussian_thompson":
        return GaussianThompson(prior_mean=section.get("prior_mean", 0.0),
                                prior_var=section.get("prior_var", 1.0),
                                noise_var=section.get("noise_var", 1.0))
    feat = Featurization(section.get("featurization", "intercept"))
    if kind == "contextual_epsilon_greedy":
        return ContextualEpsGreedy(featurization=feat,
                                   ridge_lambda=section.get("ridge_lambda", 0.0),
                                   eps=section.get("eps", 0.2))
    if kind == "boltzmann":
        return Boltzmann(featurization=feat,
                         ridge_lambda=section.get("ridge_lambda", 0.0),
                         pi_min=section.get("pi_min", 0.1),
                         steepness=section.get("steepness", 2.0))
    return FixedProb(p=section.get("p", 0.5))


def _build_estimand(section: dict) -> EstimandSpec:
    _reject_unknown(section, _ESTIMAND_KEYS, "estimand")
    return EstimandSpec(
        kind=section.get("kind", "average_reward"),
        target=section.get("target", "reward"),
        featurization=Featurization(section.get("featurization", "intercept")),
        action_interaction=section.get("action_interaction", True),
        level=section.get("level", 0.95))


@dataclass(frozen=True)
class ResolvedConfig:
    """A fully-validated experiment: trial, estimand, replication count."""

    trial: TrialConfig
    estimand: EstimandSpec
    reps: int
    raw: dict

    def resolved_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))


def _apply_override(raw: dict, assignment: str):
    if "=" not in assignment:
        raise ConfigurationError(f"override {assignment!r}: expected key=value")
    key, _, value = assignment.partition("=")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    node = raw
    parts = key.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigurationError(f"override {assignment!r}: unknown section {part!r}")
        node = node[part]
    leaf = parts[-1]
    known = set(node) | (_TOP_KEYS if node is raw else set())
    if leaf not in known:
        raise ConfigurationError(
            f"override {assignment!r}: unknown key {leaf!r} in this section")
    node[leaf] = parsed


def parse_config(source, overrides=()) -> ResolvedConfig:
    """Validate a config dict or JSON file; unknown keys are rejected by name."""
    if isinstance(source, str):
        with open(source) as fh:
            raw = json.load(fh)
    else:
        raw = json.loads(json.dumps(source))
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    for assignment in overrides:
        _apply_override(raw, assignment)
    _reject_unknown(raw, _TOP_KEYS, "config")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"schema_version {version} unsupported "
                                 f"(this build reads {SCHEMA_VERSION})")
    for key in ("n", "T", "env", "policy"):
        if key not in raw:
            raise ConfigurationError(f"config: missing required key {key!r}")

    def as_int(key, default=None):
        value = raw.get(key, default)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigurationError(f"config: {key} must be an integer, got {value!r}")
        return value

    env = _build_env(raw["env"])
    policy = _build_policy(raw["policy"])
    estimand = _build_estimand(raw.get("estimand", {}))
    trial = TrialConfig(n=as_int("n"), T=as_int("T"), env=env, policy=policy,
                        update_every=as_int("update_every", 1),
                        master_seed=as_int("master_seed", 0))
    reps = as_int("reps", 1)
    if reps < 1:
        raise ConfigurationError(f"reps must be >= 1: {reps}")
    canonical = dict(raw)
    canonical.setdefault("schema_version", SCHEMA_VERSION)
    return ResolvedConfig(trial=trial, estimand=estimand, reps=reps, raw=canonical)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def _preset_fig2_epsgreedy() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "preset": "fig2-epsgreedy",
        "n": 100_000, "T": 2, "update_every": 1, "master_seed": 20240601,
        "reps": 500,
        "env": {"kind": "nonstationary_mab", "mu0": 0.0, "deltas": [0.0, -0.25]},
        "policy": {"kind": "mab_epsilon_greedy", "eps": 0.1},
        "estimand": {"kind": "average_reward", "target": "reward", "level": 0.95},
    }


def _preset_fig2_ts() -> dict:
    cfg = _preset_fig2_epsgreedy()
    cfg.update(preset="fig2-ts", reps=1000, master_seed=20240602)
    cfg["policy"] = {"kind": "gaussian_thompson", "prior_mean": 0.0,
                     "prior_var": 1.0, "noise_var": 1.0}
    return cfg


def _preset_fig3() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "preset": "fig3",
        "n": 100_000, "T": 2, "update_every": 1, "master_seed": 20240603,
        "reps": 500,
        "env": {"kind": "misspecified_linear"},
        "policy": {"kind": "contextual_epsilon_greedy", "eps": 0.2,
                   "ridge_lambda": 0.0, "featurization": "intercept"},
        "estimand": {"kind": "least_squares", "target": "reward",
                     "featurization": "intercept", "action_interaction": True,
                     "level": 0.95},
    }


def _preset_table1(policy_kind: str) -> dict:
    policy = ({"kind": "boltzmann", "pi_min": 0.1, "steepness": 2.0,
               "ridge_lambda": 1.0, "featurization": "intercept"}
              if policy_kind == "boltzmann" else
              {"kind": "contextual_epsilon_greedy", "eps": 0.2,
               "ridge_lambda": 1.0, "featurization": "intercept"})
    return {
        "schema_version": SCHEMA_VERSION,
        "preset": f"table1-{'boltzmann' if policy_kind == 'boltzmann' else 'epsgreedy'}",
        "n": 1000, "T": 50, "update_every": 1,
        "master_seed": 20240604 if policy_kind == "boltzmann" else 20240605,
        "reps": 1000,
        "env": {"kind": "synthetic_dosage", "alpha": [0.0, 1.0, 0.0],
                "gamma": 0.95, "rho": float(np.sqrt(0.5)), "noise_sd": 1.0},
        "policy": policy,
        "estimand": {"kind": "average_reward", "target": "reward", "level": 0.95},
    }


def _preset_table2(policy_kind: str) -> dict:
    policy = ({"kind": "boltzmann", "pi_min": 0.2, "steepness": 0.05,
               "ridge_lambda": 3838.0, "featurization": "identity"}
              if policy_kind == "boltzmann" else
              {"kind": "contextual_epsilon_greedy", "eps": 0.4,
               "ridge_lambda": 3838.0, "featurization": "identity"})
    return {
        "schema_version": SCHEMA_VERSION,
        "preset": f"table2-{'boltzmann' if policy_kind == 'boltzmann' else 'epsgreedy'}",
        "n": 100, "T": 140, "update_every": 14,
        "master_seed": 20240606 if policy_kind == "boltzmann" else 20240607,
        "reps": 1000,
        "env": {"kind": "oralytics_zip",
                "population": {"source": "synthetic_prior", "pool_size": 9,
                               "pool_seed": DEFAULT_POOL_SEED}},
        "policy": policy,
        "estimand": {"kind": "average_reward", "target": "outcome", "level": 0.95},
    }


PRESETS = {
    "fig2-epsgreedy": _preset_fig2_epsgreedy,
    "fig2-ts": _preset_fig2_ts,
    "fig3": _preset_fig3,
    "table1-boltzmann": lambda: _preset_table1("boltzmann"),
    "table1-epsgreedy": lambda: _preset_table1("epsgreedy"),
    "table2-boltzmann": lambda: _preset_table2("boltzmann"),
    "table2-epsgreedy": lambda: _preset_table2("epsgreedy"),
}

PRESET_NOTES = {
    "fig2-epsgreedy": "two-period nonstationary trend, arm-means epsilon-greedy "
                      "(eps=0.1), n=100000, 500 reps; average-reward estimand",
    "fig2-ts": "two-period nonstationary trend, conjugate-Gaussian posterior "
               "sampling, n=100000, 1000 reps",
    "fig3": "misspecified linear contextual problem, contextual epsilon-greedy "
            "(eps=0.2, lambda=0), n=100000, 500 reps; pooled least-squares estimand",
    "table1-boltzmann": "dosage-driven synthetic environment (T=50, refit every "
                        "decision), softmax exploration (pi_min=0.1, s=2, lambda=1), "
                        "n=1000, 1000 reps",
    "table1-epsgreedy": "same environment, contextual epsilon-greedy (eps=0.2, "
                        "lambda=1), n=1000, 1000 reps",
    "table2-boltzmann": "mobile-health ZIP environment (T=140, weekly refits), "
                        "softmax exploration (pi_min=0.2, s=0.05, lambda=3838), "
                        "n=100, 1000 reps; average-outcome estimand",
    "table2-epsgreedy": "same environment, contextual epsilon-greedy (eps=0.4, "
                        "lambda=3838), n=100, 1000 reps",
}


def preset_config(name: str, overrides=()) -> ResolvedConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; one of {sorted(PRESETS)}")
    return parse_config(PRESETS[name](), overrides)
