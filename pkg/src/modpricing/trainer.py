"""CMA-ES training of the rollout policy parameters.

Standard rank-based (mu/mu_w, lambda) covariance matrix adaptation with
cumulative step-size control, run in a maximization convention (fitness is
episode profit). Candidates within a generation are evaluated on a common
seed set for variance reduction; episode evaluations are independent jobs.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .engine import Scenario, run_episode
from .errors import ConfigError
from .policy import ROLLOUT, PolicyParams, make_strategy

log = logging.getLogger(__name__)

TRAIN_SEED_OFFSET = 100_000
TRAIN_SEED_STRIDE = 1_000_000


@dataclass(frozen=True)
class CmaConfig:
    population: int = 12
    runs_per_eval: int = 10
    generations: int = 20
    sigma0: float = 0.5
    initial_mean: tuple = (0.0,) * 10

    def __post_init__(self):
        if self.population < 4:
            raise ConfigError("population must be >= 4")
        if self.runs_per_eval < 1:
            raise ConfigError("runs_per_eval must be >= 1")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        if self.sigma0 <= 0:
            raise ConfigError("sigma0 must be positive")


class CmaEs:
    """(mu/mu_w, lambda) CMA-ES state with standard constants for dimension n."""

    def __init__(self, mean, sigma: float, population: int,
                 rng: np.random.Generator):
        self.mean = np.asarray(mean, dtype=float).copy()
        self.n = len(self.mean)
        self.sigma = float(sigma)
        self.lam = population
        self.rng = rng

        n, lam = self.n, self.lam
        self.mu = lam // 2
        w = np.log((lam + 1) / 2.0) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mu_eff = 1.0 / np.sum(self.weights ** 2)
        self.c_sigma = (self.mu_eff + 2) / (n + self.mu_eff + 5)
        self.d_sigma = (1 + 2 * max(0.0, np.sqrt((self.mu_eff - 1) / (n + 1)) - 1)
                        + self.c_sigma)
        self.c_c = (4 + self.mu_eff / n) / (n + 4 + 2 * self.mu_eff / n)
        self.c_1 = 2.0 / ((n + 1.3) ** 2 + self.mu_eff)
        self.c_mu = min(1 - self.c_1,
                        2 * (self.mu_eff - 2 + 1 / self.mu_eff) / ((n + 2) ** 2 + self.mu_eff))
        self.chi_n = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))

        self.cov = np.eye(n)
        self.p_sigma = np.zeros(n)
        self.p_c = np.zeros(n)
        self.generation = 0
        self.repairs = 0
        self._last_y = None

    def _decompose(self):
        evals, basis = np.linalg.eigh(self.cov)
        floor = max(evals.max(), 1.0) * 1e-14
        if np.any(evals < floor):
            self.repairs += 1
            log.warning("covariance repair at generation %d: flooring eigenvalues",
                        self.generation)
            evals = np.maximum(evals, floor)
            self.cov = (basis * evals) @ basis.T
        return evals, basis

    def ask(self) -> np.ndarray:
        """Sample the next candidate block, shape (population, n)."""
        evals, basis = self._decompose()
        scale = np.sqrt(evals)
        z = self.rng.standard_normal((self.lam, self.n))
        self._last_y = z * scale @ basis.T
        return self.mean + self.sigma * self._last_y

    def step(self, fitnesses) -> "CmaEs":
        """Distribution update from the fitnesses of the last asked block."""
        if self._last_y is None or len(fitnesses) != self.lam:
            raise ConfigError("step needs one fitness per asked candidate")
        order = np.argsort(np.asarray(fitnesses, dtype=float))[::-1][:self.mu]
        y_sel = self._last_y[order]
        y_w = self.weights @ y_sel
        self.mean = self.mean + self.sigma * y_w

        evals, basis = self._decompose()
        inv_sqrt = (basis / np.sqrt(evals)) @ basis.T
        self.p_sigma = ((1 - self.c_sigma) * self.p_sigma
                        + np.sqrt(self.c_sigma * (2 - self.c_sigma) * self.mu_eff)
                        * inv_sqrt @ y_w)
        norm_ps = np.linalg.norm(self.p_sigma)
        expected = np.sqrt(1 - (1 - self.c_sigma) ** (2 * (self.generation + 1)))
        h_sigma = float(norm_ps / expected < (1.4 + 2 / (self.n + 1)) * self.chi_n)
        self.p_c = ((1 - self.c_c) * self.p_c
                    + h_sigma * np.sqrt(self.c_c * (2 - self.c_c) * self.mu_eff) * y_w)

        rank_mu = (y_sel.T * self.weights) @ y_sel
        self.cov = ((1 - self.c_1 - self.c_mu) * self.cov
                    + self.c_1 * (np.outer(self.p_c, self.p_c)
                                  + (1 - h_sigma) * self.c_c * (2 - self.c_c) * self.cov)
                    + self.c_mu * rank_mu)
        self.sigma = self.sigma * np.exp((self.c_sigma / self.d_sigma)
                                         * (norm_ps / self.chi_n - 1))
        self.generation += 1
        self._last_y = None
        return self


def cma_step(state: CmaEs, fitnesses) -> CmaEs:
    """Module-level alias for one distribution update."""
    return state.step(fitnesses)


@dataclass
class TraceRow:
    generation: int
    best_fitness: float
    mean_fitness: float
    sigma: float
    seed_base: int
    runs: int
    mean_theta: tuple


@dataclass
class TrainingTrace:
    rows: list = field(default_factory=list)

    def save(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "best_fitness", "mean_fitness", "sigma",
                        "seed_base", "runs"] + [f"theta_{i}" for i in range(10)])
            for r in self.rows:
                w.writerow([r.generation, r.best_fitness, r.mean_fitness, r.sigma,
                            r.seed_base, r.runs] + list(r.mean_theta))


def _episode_profit(scenario: Scenario, job) -> float:
    theta, seed = job
    strategy = make_strategy(ROLLOUT, scenario, PolicyParams.from_flat(theta))
    return run_episode(scenario, strategy, seed).profit


def _run_jobs(scenario: Scenario, jobs, workers: int) -> list[float]:
    fn = partial(_episode_profit, scenario)
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def evaluate_policy(theta, scenario: Scenario, runs: int, seed_base: int,
                    workers: int = 1) -> float:
    """Mean episode profit of the rollout policy over a block of seeds."""
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    seeds = range(seed_base, seed_base + runs)
    flat = tuple(theta)
    profits = _run_jobs(scenario, [(flat, s) for s in seeds], workers)
    return float(np.mean(profits))


def train(scenario: Scenario, config: CmaConfig, seed: int,
          workers: int = 1, progress=None) -> tuple[PolicyParams, TrainingTrace]:
    """Optimize the 10-dimensional policy vector by episodic CMA-ES.

    Returns the all-time best candidate by evaluated mean profit. All
    candidates of a generation share one seed block; training seeds live in
    a band far above typical evaluation seeds so held-out evaluation stays
    untouched.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC3A]))
    es = CmaEs(config.initial_mean, config.sigma0, config.population, rng)
    trace = TrainingTrace()

    def seed_base_for(gen: int) -> int:
        return TRAIN_SEED_OFFSET + seed * TRAIN_SEED_STRIDE + gen * config.runs_per_eval

    best_theta = tuple(config.initial_mean)
    best_fitness = evaluate_policy(best_theta, scenario, config.runs_per_eval,
                                   seed_base_for(0), workers)

    for gen in range(config.generations):
        base = seed_base_for(gen + 1)
        candidates = es.ask()
        jobs = [(tuple(cand), s)
                for cand in candidates
                for s in range(base, base + config.runs_per_eval)]
        profits = _run_jobs(scenario, jobs, workers)
        fitnesses = [float(np.mean(profits[i * config.runs_per_eval:
                                           (i + 1) * config.runs_per_eval]))
                     for i in range(config.population)]
        es.step(fitnesses)

        gen_best = int(np.argmax(fitnesses))
        if fitnesses[gen_best] > best_fitness:
            best_fitness = fitnesses[gen_best]
            best_theta = tuple(candidates[gen_best])
        trace.rows.append(TraceRow(
            generation=gen,
            best_fitness=float(fitnesses[gen_best]),
            mean_fitness=float(np.mean(fitnesses)),
            sigma=float(es.sigma),
            seed_base=base,
            runs=config.runs_per_eval,
            mean_theta=tuple(es.mean),
        ))
        if progress is not None:
            progress(gen, fitnesses[gen_best], best_fitness)

    return PolicyParams.from_flat(best_theta), trace
