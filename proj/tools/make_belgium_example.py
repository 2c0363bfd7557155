#!/usr/bin/env python3
"""Write a synthetic Belgium-shaped example (sex x 10 age groups x 11 provinces).

The output is invented data with the same structure as a national residual-
sample serosurvey: 220 strata, 15 of which receive no samples, validation
counts 154/181 and 322/326. It is for demonstrating the workflow only.

Usage: make_belgium_example.py <out_dir>
"""

import itertools
import os
import sys

import numpy as np

SEX = ["F", "M"]
AGE = ["0-9", "10-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-79", "80-89", "90+"]
PROVINCES = ["Antwerp", "Brussels", "EastFlanders", "FlemishBrabant", "Hainaut", "Liege",
             "Limburg", "Luxembourg", "Namur", "WalloonBrabant", "WestFlanders"]
N3 = 4000
UNSAMPLED = 15


def main(out):
    rng = np.random.default_rng(20200330)
    labels = ["|".join(c) for c in itertools.product(SEX, AGE, PROVINCES)]
    k = len(labels)

    age_w = np.array([11, 11, 12, 13, 13, 14, 12, 8, 5, 1], float)
    prov_w = np.array([16, 11, 13, 10, 12, 10, 8, 2.5, 4.5, 3.5, 10.5])
    gamma = np.array([age_w[AGE.index(a)] * prov_w[PROVINCES.index(p)]
                      for s, a, p in (l.split("|") for l in labels)])
    gamma *= rng.uniform(0.9, 1.1, k)
    gamma /= gamma.sum()

    # Residual samples over-represent the elderly and under-represent children.
    tilt = np.array([0.3, 0.5, 0.8, 0.9, 1.0, 1.1, 1.3, 1.6, 1.8, 1.0])
    s = np.array([gamma[j] * tilt[AGE.index(l.split("|")[1])] for j, l in enumerate(labels)])
    small = np.argsort(gamma)[: 3 * UNSAMPLED]
    s[rng.choice(small, UNSAMPLED, replace=False)] = 0.0
    s /= s.sum()

    eta = np.array([-2.9 + (0.15 if l.startswith("M") else 0.0)
                    + 0.05 * AGE.index(l.split("|")[1])
                    + 0.3 * np.sin(PROVINCES.index(l.split("|")[2])) for l in labels])
    p_test = 1.0 / (1.0 + np.exp(-eta))

    counts = rng.multinomial(N3, s)
    for j in np.flatnonzero((counts == 0) & (s > 0)):
        counts[j] += 1
        counts[np.argmax(counts)] -= 1
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "strata.csv"), "w") as f:
        f.write("stratum,gamma\n")
        for lab, g in zip(labels, gamma):
            f.write(f"{lab},{g:.17g}\n")
    with open(os.path.join(out, "main.csv"), "w") as f:
        f.write("x,stratum\n")
        for lab, n, p in zip(labels, counts, p_test):
            pos = rng.binomial(n, p)
            for i in range(n):
                f.write(f"{1 if i < pos else 0},{lab}\n")
    with open(os.path.join(out, "validation.csv"), "w") as f:
        f.write("role,n,correct\nsensitivity,181,154\nspecificity,326,322\n")
    with open(os.path.join(out, "model.cfg"), "w") as f:
        f.write("# Main effects of sex, age group and province.\n"
                "link = logit\nfactor = 0\nfactor = 1\nfactor = 2\n")
    print(f"{int((counts == 0).sum())} of {k} strata unsampled")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/examples/belgium")
