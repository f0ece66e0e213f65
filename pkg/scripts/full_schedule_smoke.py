#!/usr/bin/env python3
"""Production-schedule smoke run: the full 19-covariate design at the
production sample length on simulated data, 200000 iterations with
50000 burn-in and thinning 10, storing exactly 15000 draws.

Takes on the order of minutes on a desktop.  Pass --iterations etc. to
scale the schedule down.
"""

import argparse
import datetime as dt
import time

import numpy as np

from asvcal import McmcConfig, ParameterState, PriorConfig, SimSpec, run_chain, simulated_dataset, summarize
from asvcal.data import HolidayCalendar, build_design_matrix


def synthetic_calendars(years):
    def spread(month, day_base):
        return frozenset(dt.date(2013 + y, month, day_base + y % 5) for y in range(years))

    return {
        "JP": HolidayCalendar(country="JP", holidays=spread(1, 2)),
        "CN": HolidayCalendar(country="CN", holidays=spread(2, 3)),
        "DE": HolidayCalendar(country="DE", holidays=frozenset(dt.date(2013 + y, 10, 3) for y in range(years))),
        "US": HolidayCalendar(country="US", holidays=frozenset(dt.date(2013 + y, 7, 4) for y in range(years))),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t", type=int, default=2434)
    ap.add_argument("--iterations", type=int, default=200_000)
    ap.add_argument("--burn-in", type=int, default=50_000)
    ap.add_argument("--thin", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    dates = tuple(dt.date(2013, 1, 1) + dt.timedelta(days=i) for i in range(args.t + 1))
    design, labels = build_design_matrix(dates, synthetic_calendars(years=7))
    rng = np.random.default_rng(args.seed)
    truth = ParameterState(
        beta=np.concatenate([[0.1], rng.normal(0.0, 0.2, 18)]),
        gamma=np.concatenate([[2.0], rng.normal(0.0, 0.2, 18)]),
        phi=0.95,
        rho=-0.2,
        sigma2=0.09,
    )
    data, _ = simulated_dataset(SimSpec(truth=truth, design=design, seed=args.seed + 1), labels=labels)
    prior = PriorConfig.defaults(19)
    config = McmcConfig(
        n_iterations=args.iterations, burn_in=args.burn_in, thin=args.thin, seed=args.seed + 2
    )

    print(f"T={args.t}  k=19  schedule {args.iterations}/{args.burn_in}/{args.thin}  "
          f"expecting {config.n_stored} stored draws")
    start = time.time()
    out = run_chain(data, prior, config)
    elapsed = time.time() - start
    print(f"done in {elapsed:.0f}s ({elapsed / args.iterations * 1e3:.2f} ms/iteration)")
    print(f"stored draws: {out.n_stored}")
    print("acceptance rates:", {k: round(v, 3) for k, v in out.acceptance_rates.items()})

    k = 19
    show = {"phi": 2 * k, "rho": 2 * k + 1, "sigma2": 2 * k + 2, "beta:const": 0, "gamma:const": k}
    truth_vec = np.concatenate([truth.beta, truth.gamma, [truth.phi, truth.rho, truth.sigma2]])
    print(f"{'parameter':<12} {'mean':>8} {'truth':>8} {'95%CI':>20} {'CD':>6} {'IF':>8}")
    for name, col in show.items():
        s = summarize(out.draws[:, col], name)
        ci = f"[{s.ci_low:.3f}, {s.ci_high:.3f}]"
        print(f"{name:<12} {s.mean:>8.3f} {truth_vec[col]:>8.3f} {ci:>20} {s.cd:>6.3f} {s.if_:>8.2f}")


if __name__ == "__main__":
    main()
