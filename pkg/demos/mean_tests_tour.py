"""Tour of the two-sample mean tests on data where p far exceeds n.

Draws one null dataset and one shifted dataset at n = m = 40, p = 150 (where
classical Hotelling is unusable) and prints every test's verdict, then runs a
small Monte Carlo to show the size/power trade-off of the main statistics.
"""

import numpy as np

from hidim import (
    bai_saranadasa,
    chen_qin,
    chung_fraser,
    clx_max_test,
    dempster,
    park_ayyala,
    pct,
    srivastava_du,
    zoh_bayes_factor,
)
from hidim.core import RngStream, TwoSample

N, M, P = 40, 40, 150
stream = RngStream(2026)


def battery(s, rng):
    return {
        "dempster": dempster(s),
        "bs": bai_saranadasa(s),
        "cq": chen_qin(s),
        "sd": srivastava_du(s),
        "pa": park_ayyala(s),
        "pct": pct(s),
        "clx": clx_max_test(s),
        "cf": chung_fraser(s, permutations=199, rng=rng),
    }


def draw(gen, shift):
    sd = np.sqrt(gen.uniform(1.0, 2.0, size=P))
    x = gen.standard_normal((N, P)) * sd
    y = gen.standard_normal((M, P)) * sd + shift
    return TwoSample.from_arrays(x, y)


print(f"single datasets, n = m = {N}, p = {P} (p > n + m)\n")
for label, shift in (("equal means", 0.0), ("every coordinate shifted by 0.25", 0.25)):
    gen = stream.child(0 if shift == 0 else 1)
    results = battery(draw(gen, shift), gen)
    print(label)
    for name, res in sorted(results.items()):
        print(
            f"  {name:8s}  statistic {res.statistic:9.3f}   "
            f"p {res.p_value:6.4f}   [{res.null_dist}]"
        )
    print()

# The Bayes-factor test sits on top of Hotelling's statistic, so it needs
# p < n + m - 1; show it on the leading 60 coordinates instead.  The diffuse
# 0.25 shift is below what the unit prior can pick up at this size, so a
# stronger shift is included for contrast.
print("Bayes-factor test on the first 60 coordinates (p < n + m - 1):")
for label, shift in (("equal means", 0.0), ("shifted 0.25", 0.25), ("shifted 0.4", 0.4)):
    gen = stream.child(0 if shift == 0 else 1)
    s = draw(gen, shift)
    small = TwoSample.from_arrays(s.x.values[:, :60], s.y.values[:, :60])
    res = zoh_bayes_factor(small, tau0=1.0)
    print(
        f"  {label:12s}: 2 log BF = {res.statistic:7.3f}, "
        f"reject = {bool(res.diagnostics['reject'])}"
    )
print()

print("Monte Carlo check (300 replicates, alpha = 0.05):")
reps = 300
for label, shift in (("size ", 0.0), ("power", 0.2)):
    rates = dict.fromkeys(("bs", "cq", "sd", "pa"), 0)
    for r in range(reps):
        gen = stream.child(100 + 2 * r + (shift > 0))
        s = draw(gen, shift)
        for name, fn in (
            ("bs", bai_saranadasa),
            ("cq", chen_qin),
            ("sd", srivastava_du),
            ("pa", park_ayyala),
        ):
            rates[name] += fn(s).p_value <= 0.05
    shown = {k: round(v / reps, 3) for k, v in rates.items()}
    print(f"  {label} at shift {shift}: {shown}")
print("  (Monte Carlo standard error at the nominal level is about 0.013;")
print("   the diagonally studentized test runs visibly hot at n = 40.)")
