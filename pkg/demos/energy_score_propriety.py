"""Why the training loss prefers honest samplers.

The per-sample score  ||x - y|| - 0.5 ||y - y'||  (two independent draws
y, y' from a candidate sampler) is minimized in expectation only by the
true conditional distribution.  This demo scores four candidate samplers
for a 1-D Gaussian target and prints their Monte-Carlo scores: the true
sampler wins, and both shifting the mean and collapsing to a point
(deterministic mean prediction, what a squared loss would pick) lose.

Run:  python3 demos/energy_score_propriety.py
"""
import numpy as np

from dpa.metrics import energy_score_terms

rng = np.random.default_rng(7)
n = 200_000
x = rng.normal(0.0, 1.0, size=(n, 1))

candidates = {
    "true N(0,1)":        lambda: rng.normal(0.0, 1.0, size=(n, 1)),
    "shifted N(0.5,1)":   lambda: rng.normal(0.5, 1.0, size=(n, 1)),
    "wide N(0,2)":        lambda: rng.normal(0.0, 2.0, size=(n, 1)),
    "point mass at 0":    lambda: np.zeros((n, 1)),
}

print(f"{'sampler':<20} {'score':>9} {'3*SE':>9}")
scores = {}
for name, draw in candidates.items():
    s = energy_score_terms(x, draw(), draw())
    scores[name] = s
    print(f"{name:<20} {s.mean():9.5f} {3 * s.std(ddof=1) / np.sqrt(n):9.5f}")

true_score = scores["true N(0,1)"]
print("\npaired gaps vs the true sampler (positive = true sampler better):")
for name, s in scores.items():
    if name == "true N(0,1)":
        continue
    d = s - true_score
    se = d.std(ddof=1) / np.sqrt(n)
    print(f"  {name:<20} {d.mean():9.5f}  ({d.mean() / se:6.1f} SE)")
