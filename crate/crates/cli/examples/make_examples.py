"""Regenerates the bundled example data and golden features.

Independent of the Rust crate: features are plain direct sums
R1_i = sum_{l=0}^{i} k1(l/252)/252 r_{i-l} and
R2_i = sum_{l=0}^{i} k2(l/252)/252 r_{i-l}^2 over arithmetic returns.

Run from this directory: python3 make_examples.py
"""

import datetime as dt
import math

import numpy as np

YEAR = 252.0


def business_days(start, n):
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def exp_kernel(lam):
    return lambda u: lam * math.exp(-lam * u)


def tspl_kernel(alpha, delta):
    z = (alpha - 1.0) * delta ** (alpha - 1.0)
    return lambda u: z * (u + delta) ** (-alpha)


def direct_sum(x, k):
    w = [k(l / YEAR) / YEAR for l in range(len(x))]
    return [math.fsum(w[j - i] * x[i] for i in range(j + 1)) for j in range(len(x))]


def write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(header + "\n")
        for r in rows:
            f.write(",".join(r) + "\n")


def prices_walk(rng, n, s0=100.0, base=0.2, phi=0.97, vov=0.5):
    shock = vov * math.sqrt(1 - phi * phi)
    logv, p, out = 0.0, s0, [s0]
    for _ in range(n - 1):
        logv = phi * logv + shock * rng.standard_normal()
        p *= 1.0 + base * math.exp(logv) / math.sqrt(YEAR) * rng.standard_normal()
        out.append(round(p, 6))
        p = out[-1]
    return out


def returns(prices):
    return [prices[i] / prices[i - 1] - 1.0 for i in range(1, len(prices))]


def sample(rng):
    days = business_days(dt.date(2021, 3, 1), 30)
    prices = prices_walk(rng, 30)
    write_csv("sample_prices.csv", "date,close", [(d.isoformat(), f"{p:.6f}") for d, p in zip(days, prices)])
    r = returns(prices)
    r1 = direct_sum(r, exp_kernel(20.0))
    r2 = direct_sum([x * x for x in r], tspl_kernel(1.6, 0.05))
    write_csv(
        "golden_features.csv",
        "date,R1,R2",
        [(d.isoformat(), f"{a:.16e}", f"{b:.16e}") for d, a, b in zip(days[1:], r1, r2)],
    )


def synthetic(rng, n_days=1500, proxy_days=1000, noise=0.002):
    days = business_days(dt.date(2010, 1, 4), n_days)
    prices = prices_walk(rng, n_days)
    write_csv("synthetic_prices.csv", "date,close", [(d.isoformat(), f"{p:.6f}") for d, p in zip(days, prices)])
    r = returns(prices)
    r1 = direct_sum(r, exp_kernel(20.0))
    r2 = direct_sum([x * x for x in r], exp_kernel(10.0))
    b0, b1, b2 = 0.04, -2.0, 12.0
    rows = []
    first = len(r) - proxy_days
    for i in range(first, len(r)):
        sigma = b0 + b1 * r1[i] + b2 * math.sqrt(r2[i])
        rows.append((days[i + 1].isoformat(), f"{sigma * (1 + noise * rng.standard_normal()):.10f}"))
    write_csv("synthetic_proxy.csv", "date,vol", rows)
    return days[first + 1 + int(0.8 * proxy_days)]


if __name__ == "__main__":
    rng = np.random.default_rng(20240611)
    sample(rng)
    split = synthetic(rng)
    print("split date", split.isoformat())
