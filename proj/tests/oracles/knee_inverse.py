"""Knee of sse(k) = 1/k over k = 1..20: farthest point from the chord in
min-max normalized coordinates, computed with exact rationals."""
from fractions import Fraction

ks = list(range(1, 21))
sse = [Fraction(1, k) for k in ks]
x = [Fraction(k - ks[0], ks[-1] - ks[0]) for k in ks]
y = [(s - min(sse)) / (max(sse) - min(sse)) for s in sse]
# chord from (0, 1) to (1, 0): distance proportional to |x + y - 1|
dist = [abs(xi + yi - 1) for xi, yi in zip(x, y)]
best = max(range(len(ks)), key=lambda i: (dist[i], -ks[i]))
print(ks[best], float(dist[best]) / 2 ** 0.5)
