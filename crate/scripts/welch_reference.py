"""Writes crates/core/tests/fixtures/welch_reference.json.

Each case holds two samples and the Welch t statistic, Welch-Satterthwaite
degrees of freedom and two-sided p-value, computed with mpmath at 60 digits.
"""

import json
import random
from pathlib import Path

import mpmath

mpmath.mp.dps = 60


def welch(a, b):
    a = [mpmath.mpf(x) for x in a]
    b = [mpmath.mpf(x) for x in b]
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((x - ma) ** 2 for x in a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1)
    sa, sb = va / na, vb / nb
    t = (ma - mb) / mpmath.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    p = mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0, df / (df + t**2), regularized=True)
    return float(t), float(df), float(p)


def main():
    rng = random.Random(20240611)
    cases = [{"a": [2.1, 2.5, 2.3, 2.2], "b": [1.1, 1.0, 1.2, 1.4]}]
    for _ in range(50):
        na, nb = rng.randint(2, 40), rng.randint(2, 40)
        ma, mb = rng.uniform(-2, 2), rng.uniform(-2, 2)
        sa, sb = 10 ** rng.uniform(-2, 1), 10 ** rng.uniform(-2, 1)
        cases.append(
            {
                "a": [rng.gauss(ma, sa) for _ in range(na)],
                "b": [rng.gauss(mb, sb) for _ in range(nb)],
            }
        )
    for c in cases:
        c["t"], c["df"], c["p"] = welch(c["a"], c["b"])
    out = Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/welch_reference.json"
    out.write_text(json.dumps({"cases": cases}, indent=1) + "\n")


if __name__ == "__main__":
    main()
