"""Bayesian dose finding with toxicity, efficacy and biomarker outcomes.

Dose levels are 1-based everywhere in this package.
"""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    IdempotencyConflict,
    LifecycleError,
    NotFound,
    ProtocolError,
    joint_cell_prob,
    overdose_risk_reference,
)

__all__ = [
    "ConfigError",
    "IdempotencyConflict",
    "LifecycleError",
    "NotFound",
    "ProtocolError",
    "TrialStore",
    "builtin_scenarios",
    "joint_cell_prob",
    "overdose_risk_reference",
    "simulate",
]


def simulate(scenario="scenario1", *, replicates=100, seed=20240101, parallelism=1,
             design=None, prior=None, mcmc=None):
    """Run replicate trials and return operating characteristics.

    `scenario` is a builtin name or a scenario dict. The result holds the run
    config, the summary, per-level operating characteristics and the two CSV
    tables as text.
    """
    config = {"scenario": scenario, "replicates": replicates, "seed": str(seed),
              "parallelism": parallelism}
    if design is not None:
        config["design"] = design
    if prior is not None:
        config["prior"] = prior
    if mcmc is not None:
        config["mcmc"] = mcmc
    return _json.loads(_core.simulate(_json.dumps(config)))


def builtin_scenarios():
    return _json.loads(_core.builtin_scenarios())


class TrialStore:
    """Live trials kept in memory, or persisted under `data_dir` when given."""

    def __init__(self, data_dir="", mcmc=None):
        self._store = _core.TrialStore(str(data_dir), _json.dumps(mcmc or {}))

    def create(self, grid=None, design=None, prior=None, mcmc=None):
        body = {k: v for k, v in
                (("grid", grid), ("design", design), ("prior", prior), ("mcmc", mcmc))
                if v is not None}
        return _json.loads(self._store.create(_json.dumps(body)))

    def get(self, trial_id):
        return _json.loads(self._store.get(trial_id))

    def submit(self, trial_id, outcomes, idempotency_key=None):
        body = _json.dumps({"outcomes": outcomes})
        return _json.loads(self._store.submit(trial_id, body, idempotency_key))

    def whatif(self, trial_id, outcomes, mcmc_seed=None):
        body = {"outcomes": outcomes}
        if mcmc_seed is not None:
            body["mcmc_seed"] = str(mcmc_seed)
        return _json.loads(self._store.whatif(trial_id, _json.dumps(body)))

    def posterior(self, trial_id):
        return _json.loads(self._store.posterior(trial_id))

    def ids(self):
        return list(self._store.ids())
