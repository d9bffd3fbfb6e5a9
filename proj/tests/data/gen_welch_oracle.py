# Copyright 2026 The riskboost Authors.
# SPDX-License-Identifier: Apache-2.0
#
# Regenerates welch_oracle.json: fixed sample pairs and Welch t, df and
# two-sided p evaluated with 60-digit mpmath arithmetic.
import json
import random

import mpmath as mp

mp.mp.dps = 60
rnd = random.Random(20261016)


def welch(a, b):
    a = [mp.mpf(x) for x in a]
    b = [mp.mpf(x) for x in b]
    na, nb = len(a), len(b)
    ma, mb = mp.fsum(a) / na, mp.fsum(b) / nb
    va = mp.fsum((x - ma) ** 2 for x in a) / (na - 1)
    vb = mp.fsum((x - mb) ** 2 for x in b) / (nb - 1)
    se2 = va / na + vb / nb
    t = (ma - mb) / mp.sqrt(se2)
    df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = mp.betainc(df / 2, mp.mpf(1) / 2, 0, df / (df + t * t), regularized=True)
    return t, df, p


pairs = [([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])]
while len(pairs) < 50:
    na = rnd.choice([2, 3, 4, 5, 8, 10, 25, 35, 60, 150])
    nb = rnd.choice([2, 3, 5, 10, 12, 25, 40, 100])
    sa = rnd.choice([0.01, 0.1, 1, 5])
    sb = sa * rnd.choice([0.3, 1, 3])
    shift = rnd.choice([0, 0.1, 0.5, 1, 2, 4, 8]) * sa
    base = rnd.uniform(-1, 1)
    a = [round(rnd.gauss(base, sa), 6) for _ in range(na)]
    b = [round(rnd.gauss(base + shift, sb), 6) for _ in range(nb)]
    if len(set(a)) < 2 or len(set(b)) < 2:
        continue
    pairs.append((a, b))

cases = []
for a, b in pairs:
    t, df, p = welch([float(x) for x in a], [float(x) for x in b])
    cases.append({"a": a, "b": b, "t": mp.nstr(t, 25), "df": mp.nstr(df, 25), "p": mp.nstr(p, 25)})
with open("welch_oracle.json", "w") as f:
    json.dump({"cases": cases}, f, indent=1)
