#!/usr/bin/env python3
"""From raw usage records to the usage-independent quality metric.

Builds a synthetic usage log (per-day new users, visits, time on site,
exceptions for a handful of releases), applies the new-user correction,
aggregates per release, and shows the exceptions-per-user metric with the
log-scale modeling table.
"""

import datetime as dt

import numpy as np

from relqual.quality import (
    UsageRecord,
    aggregate_usage,
    log_transform,
    quality_metric,
)


def synthetic_usage(seed=0):
    rng = np.random.default_rng(seed)
    records = []
    day = dt.date(2015, 6, 1)
    for release in range(1, 9):
        days = int(rng.integers(10, 40))
        base_users = int(rng.integers(20, 400))
        for i in range(days):
            new_users = max(0, int(base_users * np.exp(-i / 8)
                                   + rng.integers(-3, 4)))
            users = new_users + int(rng.integers(0, 10))
            visits = int(new_users * rng.uniform(1.5, 2.5))
            records.append(UsageRecord(
                date=day + dt.timedelta(days=i),
                release=f"{release}.0",
                new_users=new_users,
                users=users,
                new_visits=visits,
                visits=visits + int(rng.integers(0, 5)),
                time_on_site=float(users) * rng.uniform(60, 180),
                exceptions=rng.poisson(0.02 * new_users),
            ))
        day += dt.timedelta(days=int(rng.integers(15, 45)))
    return records


def main():
    records = synthetic_usage()
    aggregates = aggregate_usage(records)

    print(f"{'release':>8} {'duration':>8} {'new users':>10} "
          f"{'exceptions':>10} {'quality':>9}")
    for agg in aggregates:
        quality = quality_metric(agg.exceptions, agg.new_users)
        print(f"{agg.release:>8} {agg.release_duration:>8} {agg.new_users:>10} "
              f"{agg.exceptions:>10} {quality:>9.4f}")

    table = log_transform(aggregates)
    print("\nlog-scale modeling table (first rows):")
    print(",".join(table.variables.names))
    for row in table.rows[:3]:
        print(",".join(f"{v:.3f}" for v in row))
    print("...")
    print("\nfeed this table to demos/01 or `relqual learn` to model how the")
    print("exception count depends on usage, and quality does not")


if __name__ == "__main__":
    main()
