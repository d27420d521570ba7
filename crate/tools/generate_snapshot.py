#!/usr/bin/env python3
"""Regenerate data/snapshot_2020-07-21.csv from tools/countries.txt.

The snapshot is a reconstruction: each country's daily new-case curve is
built from a handful of approximate public figures (first case, cumulative
total on 2020-07-21, rough peak date and height, trailing level) and then
perturbed with seeded reporting noise. A few cells are blanked, a few rows
dropped and a few cumulative values dipped so the ingest repair path has
something to do. Output is fully deterministic for a fixed seed.

    python3 tools/generate_snapshot.py [--seed 20200721] [--out data/snapshot_2020-07-21.csv]
"""

import argparse
import csv
import datetime as dt
import math
import pathlib

import numpy as np

START = dt.date(2020, 1, 22)
END = dt.date(2020, 7, 21)
N_DAYS = (END - START).days + 1

# Countries whose outbreaks predate the first day in the range.
INITIAL_CUMULATIVE = {
    "China": 548,
    "Japan": 2,
    "South Korea": 1,
    "Thailand": 2,
    "United States": 1,
    "Taiwan": 1,
    "Macao": 1,
}

# Relative reporting volume by weekday (Mon..Sun).
WEEKDAY = np.array([0.88, 1.02, 1.06, 1.06, 1.05, 1.01, 0.92])


def day_index(mmdd):
    m, d = (int(x) for x in mmdd.split("-"))
    return (dt.date(2020, m, d) - START).days


def load(path):
    rows = []
    for line in pathlib.Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        f = line.split("|")
        rows.append(
            dict(
                name=f[0],
                continent=f[1],
                population=int(f[2]),
                density=float(f[3]),
                first=day_index(f[4]),
                total=int(f[5]),
                shape=f[6],
                peak=None if f[7] == "-" else day_index(f[7]),
                peak_daily=None if f[8] == "-" else float(f[8]),
                tail=None if f[9] == "-" else float(f[9]),
            )
        )
    return rows


def wave(t, centre, rise, fall, tail):
    rel = t - centre
    up = np.exp(-0.5 * (rel / rise) ** 2)
    down = tail + (1.0 - tail) * np.exp(-0.5 * (rel / fall) ** 2)
    return np.where(rel < 0, up, down)


def shape(c, width):
    t = np.arange(N_DAYS, dtype=float)
    last = N_DAYS - 1
    f = c["first"]
    if c["shape"] == "R":
        centre = last + 25
        rise = width * min(centre - f, 80) / 3.5
        g = np.exp(-0.5 * ((t - centre) / rise) ** 2)
        g = g / g[last]
    elif c["shape"] == "P":
        rise = max(2.0, width * min(c["peak"] - f, 40) / 3.0)
        fall = 1.8 * rise
        if last > c["peak"]:
            fall = min(fall, max(2.0, (last - c["peak"]) / 3.0))
        g = wave(t, c["peak"], rise, fall, c["tail"])
    else:
        rise = max(2.0, width * min(c["peak"] - f, 40) / 3.0)
        first = wave(t, c["peak"], rise, 1.8 * rise, 0.08)
        centre2 = last + 10
        amp2 = c["tail"] / math.exp(-0.5 * (10 / 22) ** 2)
        second = amp2 * np.exp(-0.5 * ((t - centre2) / 22.0) ** 2)
        g = np.maximum(first, second)
    g[:f] = 0.0
    return g


def expected_daily(c):
    """Daily mean curve; `peak_daily` pins the curve height, the width is solved to hit the total."""
    remaining = c["total"] - INITIAL_CUMULATIVE.get(c["name"], 0)
    if c["peak_daily"] is None:
        g = shape(c, 1.0)
        return g * remaining / g.sum()
    target = remaining / c["peak_daily"]
    lo, hi = 0.15, 6.0
    if shape(c, lo).sum() > target:
        width = lo
    elif shape(c, hi).sum() < target:
        width = hi
    else:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if shape(c, mid).sum() < target:
                lo = mid
            else:
                hi = mid
        width = 0.5 * (lo + hi)
    g = shape(c, width)
    return g * remaining / g.sum()


def simulate(c, rng):
    lam = expected_daily(c)
    weekday = np.array([WEEKDAY[(START + dt.timedelta(days=i)).weekday()] for i in range(N_DAYS)])
    noise = rng.lognormal(0.0, 0.12, N_DAYS)
    daily = rng.poisson(lam * weekday * noise).astype(np.int64)
    daily[: c["first"]] = 0
    daily[c["first"]] = max(daily[c["first"]], 1)
    cumulative = np.cumsum(daily)
    cumulative += INITIAL_CUMULATIVE.get(c["name"], 0)
    cumulative[: c["first"]] = 0
    return cumulative


def lagged(x, lag, frac):
    out = np.zeros_like(x, dtype=float)
    out[lag:] = x[:-lag] * frac
    return np.round(out).astype(np.int64)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20200721)
    root = pathlib.Path(__file__).resolve().parent.parent
    ap.add_argument("--countries", default=str(root / "tools" / "countries.txt"))
    ap.add_argument("--out", default=str(root / "data" / "snapshot_2020-07-21.csv"))
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    countries = load(args.countries)
    header = [
        "date", "country", "continent", "population", "population_density",
        "total_cases", "total_deaths", "recovered", "active_cases",
    ]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for c in countries:
            cumulative = simulate(c, rng)
            cfr = rng.uniform(0.01, 0.07)
            deaths = np.minimum(lagged(cumulative, 10, cfr), cumulative)
            report_recovered = rng.random() > 0.1
            recovered = np.minimum(lagged(cumulative, 21, rng.uniform(0.5, 0.9)), cumulative - deaths)

            blank = set()
            dropped = set()
            dipped = {}
            if rng.random() < 0.3:
                for _ in range(rng.integers(1, 4)):
                    blank.add(int(rng.integers(c["first"] + 1, N_DAYS - 1)))
            if rng.random() < 0.05:
                dropped.add(int(rng.integers(c["first"] + 1, N_DAYS - 1)))
            if rng.random() < 0.08 and cumulative[-1] > 100:
                day = int(rng.integers(c["first"] + 10, N_DAYS - 1))
                dipped[day] = max(0, int(cumulative[day - 1]) - int(rng.integers(1, 6)))

            for i in range(N_DAYS):
                if i in dropped:
                    continue
                date = (START + dt.timedelta(days=i)).isoformat()
                total = dipped.get(i, int(cumulative[i]))
                rec = int(recovered[i]) if report_recovered else None
                active = total - int(deaths[i]) - rec if rec is not None else None
                w.writerow([
                    date,
                    c["name"],
                    c["continent"],
                    c["population"],
                    f"{c['density']:g}",
                    "" if i in blank else total,
                    int(deaths[i]),
                    "" if rec is None else rec,
                    "" if active is None else max(active, 0),
                ])


if __name__ == "__main__":
    main()
