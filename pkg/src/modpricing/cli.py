"""Command-line interface: simulate, train, compare, report, price-debug.

All commands honor --seed(s) and are fully reproducible; episodes fan out
over a process pool bounded by --jobs. Exit codes: 0 success, 1 runtime
failure, 2 usage or configuration error.
"""

from __future__ import annotations

import csv
import functools
import sys
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import pricing
from .choice import ChoiceParams, option_utility
from .engine import (EpisodeResult, Scenario, read_results_csv, run_episode,
                     write_results_csv)
from .errors import ConfigError
from .policy import (MYOPIC, NO_FLEET, ROLLOUT, STRATEGY_KINDS, PolicyParams,
                     load_policy_params, make_strategy, save_policy_params)
from .presets import load_scenario
from .trainer import CmaConfig, evaluate_policy, train as train_policy

COMPARE_METRICS = ("profit revenue cost serviced fleet_km fleet_min awt_min "
                   "rho t_ave delta_d_km").split()


def parse_seeds(text: str) -> list[int]:
    """Seed list syntax: '7', '0,1,2', or inclusive range '0-9'."""
    text = text.strip()
    try:
        if "," in text:
            return [int(t) for t in text.split(",") if t.strip() != ""]
        if "-" in text and not text.lstrip("-").isdigit():
            lo, hi = text.split("-", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise ConfigError(f"cannot parse seed list {text!r}")


def _strategy_from_flags(kind: str, scenario: Scenario, theta_path):
    if kind not in STRATEGY_KINDS:
        raise ConfigError(f"unknown strategy {kind!r}; choose from {STRATEGY_KINDS}")
    params = None
    if kind == ROLLOUT:
        if theta_path is None:
            raise ConfigError("strategy PO requires --theta pointing at a parameter file")
        params = load_policy_params(theta_path)
    return make_strategy(kind, scenario, params)


def _episode_job(scenario, job) -> EpisodeResult:
    kind, theta_flat, seed = job
    params = PolicyParams.from_flat(theta_flat) if theta_flat is not None else None
    strategy = make_strategy(kind, scenario, params)
    return run_episode(scenario, strategy, seed)


def run_episodes(scenario, strategy, seeds, jobs: int) -> list[EpisodeResult]:
    theta_flat = strategy.params.as_flat() if strategy.params is not None else None
    work = [(strategy.kind, theta_flat, s) for s in seeds]
    fn = functools.partial(_episode_job, scenario)
    if jobs <= 1:
        return [fn(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, work))


def command_errors(f):
    """Map configuration problems to exit 2 and runtime failures to exit 1."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ConfigError as e:
            raise click.UsageError(str(e))
        except click.ClickException:
            raise
        except Exception as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Mobility-on-demand pricing simulator and policy trainer."""


@main.command()
@click.option("--scenario", "scenario_src", required=True,
              help="Scenario YAML path or preset name (e.g. 'desk').")
@click.option("--strategy", "strategy_kind", required=True,
              help="One of S, Sh, S+Sh, PM, PO, none.")
@click.option("--seeds", default="0", show_default=True)
@click.option("--theta", "theta_path", type=click.Path(exists=True), default=None,
              help="Policy parameter file (required for PO).")
@click.option("--jobs", default=1, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--trip-log", "trip_log", type=click.Path(), default=None,
              help="Also write a per-trip event log for the first seed.")
@command_errors
def simulate(scenario_src, strategy_kind, seeds, theta_path, jobs, out_path, trip_log):
    """Run episodes of one strategy; one CSV row per seed."""
    scenario = load_scenario(scenario_src)
    strategy = _strategy_from_flags(strategy_kind, scenario, theta_path)
    seed_list = parse_seeds(seeds)
    results = run_episodes(scenario, strategy, seed_list, jobs)
    write_results_csv(results, out_path)
    if trip_log is not None:
        run_episode(scenario, strategy, seed_list[0], trip_log=trip_log)
    click.echo(f"wrote {len(results)} episode rows to {out_path}")


@main.command()
@click.option("--scenario", "scenario_src", required=True)
@click.option("--cma-config", "cma_path", type=click.Path(exists=True), default=None,
              help="YAML with population / runs_per_eval / generations / sigma0.")
@click.option("--seed", default=0, show_default=True)
@click.option("--jobs", default=1, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Where to write the trained parameter file.")
@click.option("--trace-out", "trace_path", type=click.Path(), default=None,
              help="Training trace CSV (default: <out>.trace.csv).")
@command_errors
def train(scenario_src, cma_path, seed, jobs, out_path, trace_path):
    """CMA-ES training of the rollout pricing policy."""
    scenario = load_scenario(scenario_src)
    config = _load_cma_config(cma_path)
    params, trace = train_policy(scenario, config, seed, workers=jobs,
                                 progress=_train_progress)
    save_policy_params(params, out_path)
    trace.save(trace_path if trace_path else f"{out_path}.trace.csv")
    click.echo(f"wrote trained parameters to {out_path}")


def _train_progress(gen, gen_best, best):
    click.echo(f"generation {gen}: best {gen_best:.2f} (all-time {best:.2f})")


def _load_cma_config(path) -> CmaConfig:
    if path is None:
        return CmaConfig()
    import yaml

    with open(path) as fh:
        d = yaml.safe_load(fh) or {}
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: CMA config must be a mapping")
    if "initial_mean" in d:
        d["initial_mean"] = tuple(float(v) for v in d["initial_mean"])
    try:
        return CmaConfig(**d)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}")


@main.command()
@click.option("--scenario", "scenario_src", required=True)
@click.option("--strategies", default="S,Sh,S+Sh,PM,PO", show_default=True)
@click.option("--seeds", default="0-9", show_default=True)
@click.option("--theta", "theta_path", type=click.Path(exists=True), default=None)
@click.option("--jobs", default=1, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Comparison report CSV.")
@click.option("--episodes-out", "episodes_path", type=click.Path(), default=None,
              help="Also write the raw per-episode rows.")
@command_errors
def compare(scenario_src, strategies, seeds, theta_path, jobs, out_path, episodes_path):
    """Evaluate several strategies on identical seed sets."""
    kinds = [k.strip() for k in strategies.split(",") if k.strip()]
    if len(kinds) < 2:
        raise ConfigError("compare needs at least 2 strategies")
    scenario = load_scenario(scenario_src)
    seed_list = parse_seeds(seeds)

    all_results: dict[str, list[EpisodeResult]] = {}
    for kind in kinds:
        strategy = _strategy_from_flags(kind, scenario, theta_path)
        all_results[kind] = run_episodes(scenario, strategy, seed_list, jobs)

    _audit_common_random_numbers(all_results)
    reference = ROLLOUT if ROLLOUT in kinds else kinds[0]
    rows = comparison_rows(all_results, reference)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "strategy", "mean", "se", "pct_vs_" + reference])
        w.writerows(rows)
    if episodes_path:
        write_results_csv([r for rs in all_results.values() for r in rs], episodes_path)
    _print_comparison(rows, reference)


def _audit_common_random_numbers(all_results):
    per_seed: dict[int, set] = {}
    for results in all_results.values():
        for r in results:
            per_seed.setdefault(r.seed, set()).add(r.requests)
    bad = {s: counts for s, counts in per_seed.items() if len(counts) > 1}
    if bad:
        raise RuntimeError(f"request streams diverged across strategies: {bad}")


def comparison_rows(all_results: dict, reference: str) -> list:
    rows = []
    means: dict[tuple, float | None] = {}
    for metric in COMPARE_METRICS:
        for kind, results in all_results.items():
            vals = [getattr(r, metric) for r in results]
            vals = [v for v in vals if v is not None]
            if not vals:
                means[(metric, kind)] = None
                continue
            means[(metric, kind)] = float(np.mean(vals))
    for metric in COMPARE_METRICS:
        ref = means.get((metric, reference))
        for kind, results in all_results.items():
            vals = [getattr(r, metric) for r in results if getattr(r, metric) is not None]
            if not vals:
                rows.append([metric, kind, "", "", ""])
                continue
            mean = float(np.mean(vals))
            se = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
            if ref is None or ref == 0:
                pct = ""
            else:
                pct = 100.0 * (mean - ref) / abs(ref)
            rows.append([metric, kind, mean, se, pct])
    return rows


def _print_comparison(rows, reference):
    click.echo(f"comparison (percentage differences vs {reference}):")
    last_metric = None
    for metric, kind, mean, se, pct in rows:
        if metric != last_metric:
            click.echo(f"  {metric}:")
            last_metric = metric
        if mean == "":
            click.echo(f"    {kind:>6}: n/a")
        else:
            pct_txt = f"{pct:+8.2f}%" if pct != "" else "      --"
            click.echo(f"    {kind:>6}: {mean:12.3f} +- {se:8.3f}  {pct_txt}")


@main.command()
@click.argument("inputs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@command_errors
def report(inputs, out_path):
    """Congestion/capacity tradeoff records vs the zero-fleet baseline."""
    results = []
    for path in inputs:
        results.extend(read_results_csv(path))
    rows = tradeoff_rows(results)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "strategy", "t_ave_pct_vs_none", "rho_pct_vs_none",
                    "delta_d_km"])
        w.writerows(rows)
    click.echo(f"wrote {len(rows)} tradeoff rows to {out_path}")


def _mean_or_none(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def tradeoff_rows(results) -> list:
    by_scenario: dict[str, dict[str, list[EpisodeResult]]] = {}
    for r in results:
        by_scenario.setdefault(r.scenario, {}).setdefault(r.strategy, []).append(r)
    rows = []
    for scen, by_strategy in sorted(by_scenario.items()):
        baseline = by_strategy.get(NO_FLEET)
        others = [k for k in by_strategy if k != NO_FLEET]
        if not others:
            continue
        if baseline is None:
            click.echo(f"warning: no zero-fleet baseline rows for scenario "
                       f"{scen!r}; skipping", err=True)
            continue
        base_t = _mean_or_none([r.t_ave for r in baseline])
        base_rho = _mean_or_none([r.rho for r in baseline])
        for kind in sorted(others):
            rs = by_strategy[kind]
            t_ave = _mean_or_none([r.t_ave for r in rs])
            rho = _mean_or_none([r.rho for r in rs])
            t_pct = ("" if t_ave is None or not base_t
                     else 100.0 * (t_ave - base_t) / base_t)
            rho_pct = ("" if rho is None or not base_rho
                       else 100.0 * (rho - base_rho) / base_rho)
            delta_d = _mean_or_none([r.delta_d_km for r in rs])
            rows.append([scen, kind, t_pct, rho_pct,
                         delta_d if delta_d is not None else ""])
    return rows


@main.command("price-debug")
@click.option("--v0", required=True, type=float, help="Rejection weight exp(U0).")
@click.option("--option", "option_specs", multiple=True, required=True,
              help="type:fare:cost:travel_time[:opportunity_cost], repeatable.")
@click.option("--mu", default=0.5, show_default=True)
@click.option("--e1", default=1.0, show_default=True)
@click.option("--e2", default=2.0, show_default=True)
@command_errors
def price_debug(v0, option_specs, mu, e1, e2):
    """Solve one pricing instance and print the iteration trace."""
    params = ChoiceParams(mu=mu, e1=e1, e2=e2)
    options = []
    for spec in option_specs:
        parts = spec.split(":")
        if len(parts) not in (4, 5):
            raise ConfigError(f"bad --option {spec!r}; "
                              "use type:fare:cost:travel_time[:opportunity_cost]")
        typ, fare, cost, ttime = parts[0], float(parts[1]), float(parts[2]), float(parts[3])
        a = float(parts[4]) if len(parts) == 5 else 0.0
        options.append(pricing.PricingOption(
            option_type=typ, fare=fare, cost=cost, travel_time=ttime,
            base_utility=option_utility(typ, fare, 0.0, ttime, params),
            opportunity_cost=a))
    inst = pricing.PricingInstance(options=tuple(options), v0=v0,
                                   sens=pricing.scaled_sensitivities(params))
    sol = pricing.solve_pricing(inst)
    for i, z in enumerate(sol.z_history):
        click.echo(f"iter {i:3d}: z = {z:.12f}")
    click.echo(f"converged in {sol.iterations} iterations, residual {sol.residual:.3e}")
    for opt, d in zip(options, sol.deltas):
        click.echo(f"  {opt.option_type}: fare {opt.fare:.3f} margin {opt.margin:.3f} "
                   f"delta* {d:+.4f}")
    click.echo(f"expected profit z* = {sol.z:.6f}")


if __name__ == "__main__":
    main()
