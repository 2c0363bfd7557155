#!/usr/bin/env python3
"""Regenerate the default stratum tables used by the DGP 3 and DGP 4 simulations.

Each table lists, per stratum, the target-population proportion (gamma) and
the main-study sampling probability (sampling). The construction is:

  1. gamma ~ Dirichlet(2, ..., 2) from a fixed seed.
  2. sampling weights w_j = gamma_j * exp(-tilt * eta_std_j) * u_j, where eta
     is the stratum's linear predictor without intercept (standardized) and u
     is seeded log-normal jitter; low-prevalence strata are oversampled.
  3. The two strata with the lowest linear predictor among the five with the
     largest gamma get sampling = 2 * gamma before renormalization.
  4. `tilt` is found by bisection so the probability that every stratum is
     sampled at least once (n3 = 2500) hits the requested target.

Usage: make_dgp_tables.py <out_dir>
"""

import itertools
import math
import sys

import numpy as np

N3 = 2500

DGP3_LEVELS = [["z10", "z11"], ["z20", "z21", "z22", "z23"], ["z30", "z31", "z32", "z33", "z34"]]
DGP3_TERMS = [(0, "z11", -1.0), (1, "z20", -0.6), (1, "z21", 0.8), (2, "z30", 0.6), (2, "z31", 0.4)]

DGP4_LEVELS = DGP3_LEVELS + [["z40", "z41"]]
DGP4_TERMS = [(0, "z11", -1.0), (1, "z20", 3.25), (1, "z21", 0.8), (2, "z30", 0.6), (2, "z31", 0.4),
              (3, "z41", 0.1)]


def strata(levels, terms):
    labels, eta = [], []
    for combo in itertools.product(*levels):
        labels.append("|".join(combo))
        eta.append(sum(coef for comp, lvl, coef in terms if combo[comp] == lvl))
    return labels, np.array(eta)


def positivity(s):
    # P(every stratum sampled) under multinomial(N3, s), Bonferroni-free product form.
    return float(np.prod(1.0 - (1.0 - s) ** N3))


def build(seed, levels, terms, target, jitter):
    rng = np.random.default_rng(seed)
    labels, eta = strata(levels, terms)
    k = len(labels)
    gamma = rng.dirichlet(np.full(k, 2.0))
    u = np.exp(jitter * rng.standard_normal(k))
    eta_std = (eta - eta.mean()) / eta.std()

    top = np.argsort(-gamma)[:5]
    boosted = top[np.argsort(eta[top])[:2]]

    def sampling(tilt):
        w = gamma * np.exp(-tilt * eta_std) * u
        w[boosted] = 0.0
        w = w / w.sum() * (1.0 - 2.0 * gamma[boosted].sum())
        w[boosted] = 2.0 * gamma[boosted]
        return w / w.sum()

    lo, hi = 0.0, 6.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if positivity(sampling(mid)) > target:
            lo = mid
        else:
            hi = mid
    s = sampling(0.5 * (lo + hi))
    return labels, gamma, s, eta


def write(path, labels, gamma, s):
    with open(path, "w") as f:
        f.write("stratum,gamma,sampling\n")
        for lab, g, p in zip(labels, gamma, s):
            f.write(f"{lab},{g:.17g},{p:.17g}\n")


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "."
    l3, g3, s3, e3 = build(20210603, DGP3_LEVELS, DGP3_TERMS, 0.89, 0.25)
    write(f"{out}/dgp3_strata.csv", l3, g3, s3)
    l4, g4, s4, e4 = build(7, DGP4_LEVELS, DGP4_TERMS, 0.0005, 1.4)
    write(f"{out}/dgp4_strata.csv", l4, g4, s4)
    for name, g, s in (("dgp3", g3, s3), ("dgp4", g4, s4)):
        print(name, "positivity", positivity(s), "min expected count", N3 * s.min(),
              "expected empty strata", float(np.sum((1 - s) ** N3)))


if __name__ == "__main__":
    main()
