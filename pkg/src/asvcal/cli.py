"""Batch front-end: config-file driven simulate / ingest / estimate runs.

The run configuration is a single INI-style file.  Exactly one of a
[data] section (price CSV plus four holiday files) or a [simulate]
section (true parameters plus a synthetic calendar) must be present.
All MCMC and prior defaults mirror the production estimation setup
(200000 iterations, 50000 burn-in, thin 10, Beta(20, 1.5) persistence
prior, diagonal-100 coefficient priors).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 sampler
error.  Output CSVs carry a header row; floats are serialized with 17
significant digits, so identical seed and config reproduce byte-identical
files.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as dt
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import data as data_mod
from .data import COUNTRIES, DataError, HOLIDAY_CLASSES
from .diagnostics import CD_THRESHOLD, ParamSummary, summarize
from .model import Dataset, ParameterState, PriorConfig
from .sampler import ChainOutput, McmcConfig, SamplerError, run_chain
from .simulate import SimSpec, simulate

__all__ = ["ConfigError", "RunConfig", "parse_config", "cmd_simulate", "cmd_ingest", "cmd_estimate", "main"]

_DESIGNS = ("calendar", "weekday", "constant")


class ConfigError(ValueError):
    """Raised for malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class SimSettings:
    t: int
    start_date: dt.date
    design: str
    beta: np.ndarray
    gamma: np.ndarray
    phi: float
    rho: float
    sigma2: float
    price_start: float
    seed: int


@dataclass(frozen=True)
class RunConfig:
    out_dir: Path
    seed: int
    chains: int
    mcmc: McmcConfig
    prior_scalars: dict
    coef_prior_var: float
    mode: str
    price_csv: Optional[Path] = None
    holiday_paths: Optional[dict] = None
    data_design: str = "calendar"
    weekend_rule: bool = True
    sim: Optional[SimSettings] = None


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _ensure_out_dir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {path} ({exc})") from None


def _parse_vector(text: str, where: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",")])
    except ValueError:
        raise ConfigError(f"{where}: expected a comma-separated list of numbers") from None


def _design_width(design: str) -> int:
    return {"constant": 1, "weekday": 7, "calendar": 19}[design]


def parse_config(
    path: str | Path,
    seed_override: Optional[int] = None,
    chains_override: Optional[int] = None,
    out_override: Optional[str] = None,
) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent

    def resolve(raw: str) -> Path:
        p = Path(raw)
        return p if p.is_absolute() else base / p

    run = parser["run"] if parser.has_section("run") else {}
    seed = seed_override if seed_override is not None else int(run.get("seed", 0))
    chains = chains_override if chains_override is not None else int(run.get("chains", 1))
    if chains < 1:
        raise ConfigError("chains must be at least 1")
    out_raw = out_override if out_override is not None else run.get("out")
    if out_raw is None:
        raise ConfigError("output directory missing: set [run] out or pass --out")
    out_dir = Path(out_raw) if out_override is not None else resolve(str(out_raw))

    mc = parser["mcmc"] if parser.has_section("mcmc") else {}
    try:
        mcmc = McmcConfig(
            n_iterations=int(mc.get("n_iterations", 200_000)),
            burn_in=int(mc.get("burn_in", 50_000)),
            thin=int(mc.get("thin", 10)),
            seed=seed,
            target_acceptance=float(mc.get("target_acceptance", 0.44)),
            adapt_during_burn_in_only=str(mc.get("adapt_during_burn_in_only", "true")).lower()
            in ("1", "true", "yes", "on"),
        )
    except ValueError as exc:
        raise ConfigError(f"[mcmc]: {exc}") from None

    pr = parser["prior"] if parser.has_section("prior") else {}
    prior_scalars = {
        "phi_a": float(pr.get("phi_a", 20.0)),
        "phi_b": float(pr.get("phi_b", 1.5)),
        "rho_a": float(pr.get("rho_a", 1.0)),
        "rho_b": float(pr.get("rho_b", 1.0)),
        "sigma_nu": float(pr.get("sigma_nu", 5.0)),
        "sigma_lambda": float(pr.get("sigma_lambda", 0.01)),
    }
    coef_prior_var = float(pr.get("coef_prior_var", 100.0))

    has_data = parser.has_section("data")
    has_sim = parser.has_section("simulate")
    if has_data == has_sim:
        raise ConfigError("exactly one of a [data] or a [simulate] section is required")

    if has_data:
        section = parser["data"]
        design = section.get("design", "calendar").strip().lower()
        if design not in _DESIGNS:
            raise ConfigError(f"[data] design must be one of {_DESIGNS}, got {design!r}")
        if "price_csv" not in section:
            raise ConfigError("[data] price_csv is required")
        holiday_paths = None
        if design == "calendar":
            holiday_paths = {}
            for country in COUNTRIES:
                key = f"holidays_{country.lower()}"
                if key not in section:
                    raise ConfigError(f"[data] {key} is required for the calendar design")
                holiday_paths[country] = resolve(section[key])
        return RunConfig(
            out_dir=out_dir,
            seed=seed,
            chains=chains,
            mcmc=mcmc,
            prior_scalars=prior_scalars,
            coef_prior_var=coef_prior_var,
            mode="data",
            price_csv=resolve(section["price_csv"]),
            holiday_paths=holiday_paths,
            data_design=design,
            weekend_rule=section.getboolean("weekend_rule", fallback=True),
        )

    section = parser["simulate"]
    design = section.get("design", "constant").strip().lower()
    if design not in ("constant", "weekday"):
        raise ConfigError(f"[simulate] design must be 'constant' or 'weekday', got {design!r}")
    try:
        t = int(section.get("t", "1000"))
        start_date = dt.date.fromisoformat(section.get("start_date", "2013-01-01"))
        phi = float(section.get("phi", "0.95"))
        rho = float(section.get("rho", "0.0"))
        sigma2 = float(section.get("sigma2", "0.09"))
        price_start = float(section.get("price_start", "100.0"))
        sim_seed = int(section.get("seed", str(seed)))
    except ValueError as exc:
        raise ConfigError(f"[simulate]: {exc}") from None
    k = _design_width(design)
    beta = _parse_vector(section.get("beta", ",".join(["0"] * k)), "[simulate] beta")
    gamma = _parse_vector(section.get("gamma", ",".join(["0"] * k)), "[simulate] gamma")
    if beta.size != k or gamma.size != k:
        raise ConfigError(f"[simulate] beta and gamma must have {k} entries for the {design} design")
    if t < 3:
        raise ConfigError("[simulate] t must be at least 3")
    return RunConfig(
        out_dir=out_dir,
        seed=seed,
        chains=chains,
        mcmc=mcmc,
        prior_scalars=prior_scalars,
        coef_prior_var=coef_prior_var,
        mode="simulate",
        sim=SimSettings(
            t=t,
            start_date=start_date,
            design=design,
            beta=beta,
            gamma=gamma,
            phi=phi,
            rho=rho,
            sigma2=sigma2,
            price_start=price_start,
            seed=sim_seed,
        ),
    )


def _build_prior(k: int, config: RunConfig) -> PriorConfig:
    eye = np.eye(k) * config.coef_prior_var
    return PriorConfig(
        beta_mean=np.zeros(k),
        beta_cov=eye,
        gamma_mean=np.zeros(k),
        gamma_cov=eye.copy(),
        **config.prior_scalars,
    )


def _sim_design(sim: SimSettings) -> tuple[np.ndarray, tuple[str, ...], tuple[dt.date, ...]]:
    dates = tuple(sim.start_date + dt.timedelta(days=i) for i in range(sim.t + 1))
    if sim.design == "constant":
        matrix, labels = data_mod.build_constant_design(sim.t + 1)
    else:
        matrix, labels = data_mod.build_weekday_design(dates)
    return matrix, labels, dates


def _simulated_dataset(sim: SimSettings) -> tuple[Dataset, np.ndarray, tuple[dt.date, ...]]:
    matrix, labels, dates = _sim_design(sim)
    truth = ParameterState(beta=sim.beta, gamma=sim.gamma, phi=sim.phi, rho=sim.rho, sigma2=sim.sigma2)
    returns, path = simulate(SimSpec(truth=truth, design=matrix, seed=sim.seed))
    dataset = Dataset(returns=returns, design=matrix, labels=labels)
    return dataset, path.h, dates


def cmd_simulate(config: RunConfig) -> Path:
    """Write a synthetic dataset in the same formats the ingestion reads."""
    if config.sim is None:
        raise ConfigError("the simulate command needs a [simulate] section")
    sim = config.sim
    dataset, h, dates = _simulated_dataset(sim)
    out = config.out_dir
    _ensure_out_dir(out)

    # Prices reconstruct the returns exactly: P_t = P_{t-1} exp(y_t / 100).
    prices = sim.price_start * np.exp(np.concatenate([[0.0], np.cumsum(dataset.returns)]) / 100.0)
    price_dates = (sim.start_date - dt.timedelta(days=1),) + dates[:-1]
    with (out / "prices.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", "close"])
        for d, p in zip(price_dates, prices):
            writer.writerow([d.isoformat(), _fmt(p)])

    for country in COUNTRIES:
        with (out / f"holidays_{country.lower()}.txt").open("w") as handle:
            handle.write(f"# no {country} holidays in this simulated sample\n")

    with (out / "truth.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["name", "value"])
        for name, value in zip(dataset.labels, sim.beta):
            writer.writerow([f"beta:{name}", _fmt(value)])
        for name, value in zip(dataset.labels, sim.gamma):
            writer.writerow([f"gamma:{name}", _fmt(value)])
        writer.writerow(["phi", _fmt(sim.phi)])
        writer.writerow(["rho", _fmt(sim.rho)])
        writer.writerow(["sigma2", _fmt(sim.sigma2)])

    with (out / "h_path.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", "h"])
        for d, value in zip(dates, h):
            writer.writerow([d.isoformat(), _fmt(value)])
    return out


def _load_observed(config: RunConfig) -> tuple[Dataset, tuple[dt.date, ...]]:
    series = data_mod.load_price_csv(config.price_csv)
    returns = data_mod.compute_returns(series)
    rdates = data_mod.return_dates(series)
    design_dates = data_mod.extend_dates(rdates)
    if config.data_design == "calendar":
        calendars = {
            country: data_mod.load_holiday_file(config.holiday_paths[country], country)
            for country in COUNTRIES
        }
        matrix, labels = data_mod.build_design_matrix(design_dates, calendars, config.weekend_rule)
    elif config.data_design == "weekday":
        matrix, labels = data_mod.build_weekday_design(design_dates)
    else:
        matrix, labels = data_mod.build_constant_design(len(design_dates))
    return Dataset(returns=returns, design=matrix, labels=labels), design_dates


def _stats_rows(config: RunConfig, returns: np.ndarray, rdates) -> list[list]:
    groups: list[tuple[str, np.ndarray]] = [("All", returns)]
    by_day = data_mod.slice_by_weekday(returns, rdates)
    groups += [(name, by_day[name]) for name in data_mod.WEEKDAY_ORDER]
    if config.data_design == "calendar":
        calendars = {
            country: data_mod.load_holiday_file(config.holiday_paths[country], country)
            for country in COUNTRIES
        }
        by_class = data_mod.slice_by_holiday_class(returns, rdates, calendars, config.weekend_rule)
        for cls in HOLIDAY_CLASSES:
            for country in COUNTRIES:
                groups.append((f"{cls}_{country.lower()}", by_class[(cls, country)]))
    rows = [["group", "obs", "mean", "sd", "min", "max", "skew", "kurt"]]
    for name, values in groups:
        if values.size >= 2:
            s = data_mod.descriptive_stats(values)
            rows.append([name, s.obs, _fmt(s.mean), _fmt(s.sd), _fmt(s.min), _fmt(s.max), _fmt(s.skew), _fmt(s.kurt)])
        else:
            rows.append([name, values.size, "", "", "", "", "", ""])
    return rows


def cmd_ingest(config: RunConfig) -> Path:
    """Write returns, the design matrix and a descriptive-stats report."""
    if config.mode != "data":
        raise ConfigError("the ingest command needs a [data] section")
    dataset, design_dates = _load_observed(config)
    rdates = design_dates[:-1]
    out = config.out_dir
    _ensure_out_dir(out)

    with (out / "returns.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", "return"])
        for d, r in zip(rdates, dataset.returns):
            writer.writerow([d.isoformat(), _fmt(r)])

    data_mod.write_design_matrix_csv(out / "design_matrix.csv", design_dates, dataset.design, dataset.labels)

    rows = _stats_rows(config, dataset.returns, rdates)
    with (out / "descriptive_stats.csv").open("w", newline="") as handle:
        csv.writer(handle).writerows(rows)
    width = max(len(str(row[0])) for row in rows)
    for row in rows:
        print("  ".join([f"{str(row[0]):<{width}}"] + [f"{_maybe_round(v):>9}" for v in row[1:]]))
    return out


def _maybe_round(value) -> str:
    if isinstance(value, int):
        return str(value)
    try:
        return f"{float(value):.3f}"
    except (TypeError, ValueError):
        return str(value)


def _summary_order(k: int, labels: tuple[str, ...]) -> list[tuple[str, str, int]]:
    """(display name, source, column index); source 'draw' indexes the
    draws matrix, 'sigma' takes sqrt of the sigma2 column."""
    order: list[tuple[str, str, int]] = []
    for j, lab in enumerate(labels):
        order.append((f"beta:{lab}", "draw", j))
    order.append((f"gamma:{labels[0]}", "draw", k))
    order.append(("phi", "draw", 2 * k))
    order.append(("sigma", "sigma", 2 * k + 2))
    order.append(("rho", "draw", 2 * k + 1))
    for j, lab in enumerate(labels[1:], start=1):
        order.append((f"gamma:{lab}", "draw", k + j))
    return order


def _summaries(output: ChainOutput, labels: tuple[str, ...]) -> list[ParamSummary]:
    k = len(labels)
    out = []
    for name, source, col in _summary_order(k, labels):
        column = output.draws[:, col]
        if source == "sigma":
            column = np.sqrt(column)
        out.append(summarize(column, name))
    return out


def write_summary_csv(path: Path, summaries: list[ParamSummary]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["name", "mean", "sd", "ci_low", "ci_high", "cd", "if_", "excludes_zero"])
        for s in summaries:
            writer.writerow(
                [s.name, _fmt(s.mean), _fmt(s.sd), _fmt(s.ci_low), _fmt(s.ci_high), _fmt(s.cd), _fmt(s.if_),
                 "true" if s.excludes_zero else "false"]
            )


def read_summary_csv(path: Path) -> list[ParamSummary]:
    out = []
    with Path(path).open(newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            out.append(
                ParamSummary(
                    name=row["name"],
                    mean=float(row["mean"]),
                    sd=float(row["sd"]),
                    ci_low=float(row["ci_low"]),
                    ci_high=float(row["ci_high"]),
                    cd=float(row["cd"]),
                    if_=float(row["if_"]),
                    excludes_zero=row["excludes_zero"] == "true",
                )
            )
    return out


def _write_chain_outputs(
    out: Path,
    output: ChainOutput,
    labels: tuple[str, ...],
    design_dates,
    verbose: bool = True,
) -> None:
    _ensure_out_dir(out)
    with (out / "chain.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(output.param_names)
        for row in output.draws:
            writer.writerow([_fmt(v) for v in row])

    summaries = _summaries(output, labels)
    write_summary_csv(out / "summary.csv", summaries)

    # Volatility path on the exp(h/2) scale, summarized per draw.
    vols = np.exp(0.5 * output.h_draws)
    vol_mean = vols.mean(axis=0)
    vol_lo, vol_hi = np.percentile(vols, [2.5, 97.5], axis=0)
    with (out / "volatility.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", "vol_mean", "vol_ci_low", "vol_ci_high"])
        for d, m, lo, hi in zip(design_dates, vol_mean, vol_lo, vol_hi):
            writer.writerow([d.isoformat(), _fmt(m), _fmt(lo), _fmt(hi)])

    if not verbose:
        return
    name_width = max(len(s.name) for s in summaries)
    print(f"{'parameter':<{name_width}}  {'mean':>9}  {'sd':>9}  {'95%CI':>23}  {'CD':>6}  {'IF':>8}")
    for s in summaries:
        ci = f"[{s.ci_low:.3f}, {s.ci_high:.3f}]"
        print(f"{s.name:<{name_width}}  {s.mean:>9.3f}  {s.sd:>9.3f}  {ci:>23}  {s.cd:>6.3f}  {s.if_:>8.3f}")
    flagged = [s.name for s in summaries if s.cd < CD_THRESHOLD]
    if flagged:
        print(f"convergence flag (CD < {CD_THRESHOLD}): {', '.join(flagged)}")


def _run_single(args) -> None:
    dataset, prior, mcmc, out, labels, design_dates = args
    output = run_chain(dataset, prior, mcmc)
    _write_chain_outputs(out, output, labels, design_dates, verbose=False)


def cmd_estimate(config: RunConfig) -> Path:
    """Estimate the model and write chain, summary and volatility CSVs."""
    if config.mcmc.n_stored < 100:
        raise ConfigError(
            "estimation needs at least 100 stored draws for the diagnostics; "
            "raise n_iterations or lower burn_in/thin"
        )
    if config.mode == "data":
        dataset, design_dates = _load_observed(config)
    else:
        dataset, _, design_dates = _simulated_dataset(config.sim)
    prior = _build_prior(dataset.n_covariates, config)

    out = config.out_dir
    _ensure_out_dir(out)
    if config.chains == 1:
        output = run_chain(dataset, prior, config.mcmc)
        _write_chain_outputs(out, output, dataset.labels, design_dates)
        return out

    jobs = []
    for index in range(config.chains):
        mcmc = McmcConfig(
            n_iterations=config.mcmc.n_iterations,
            burn_in=config.mcmc.burn_in,
            thin=config.mcmc.thin,
            seed=config.seed + index,
            target_acceptance=config.mcmc.target_acceptance,
            adapt_during_burn_in_only=config.mcmc.adapt_during_burn_in_only,
        )
        jobs.append((dataset, prior, mcmc, out / f"chain_{index:02d}", dataset.labels, design_dates))
    workers = min(config.chains, os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        list(pool.map(_run_single, jobs))
    for index in range(config.chains):
        print(f"chain {index:02d} (seed {config.seed + index}) written to {out / f'chain_{index:02d}'}")
    return out


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="asvcal",
        description="Asymmetric stochastic volatility with calendar covariates",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("simulate", "write a synthetic dataset"),
        ("ingest", "ingest prices and calendars, write returns/design/stats"),
        ("estimate", "run the sampler and write chain/summary/volatility"),
    ):
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("--config", required=True, help="run configuration file")
        cmd.add_argument("--seed", type=int, default=None, help="override the run seed")
        cmd.add_argument("--chains", type=int, default=None, help="number of independent chains")
        cmd.add_argument("--out", default=None, help="override the output directory")
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config, args.seed, args.chains, args.out)
        if args.command == "simulate":
            cmd_simulate(config)
        elif args.command == "ingest":
            cmd_ingest(config)
        else:
            cmd_estimate(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except SamplerError as exc:
        print(f"sampler error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
