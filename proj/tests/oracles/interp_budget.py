"""Independent check of the dense-scan interpolation error of the planted
saturating throughput family T(x) = a (x + beta d) / (x + d) sampled at powers
of two 32..8192. Prints the worst |T(x)/L(x) - 1| over the family, where L is
the piecewise-linear interpolant. The scale a cancels."""
from fractions import Fraction

grid = [2**e for e in range(5, 14)]


def worst(d, beta):
    def t(x):
        return (Fraction(x) + beta * d) / (Fraction(x) + d)

    best = (Fraction(0), None)
    for lo, hi in zip(grid, grid[1:]):
        tl, th = t(lo), t(hi)
        for x in range(lo, hi + 1):
            interp = tl + Fraction(x - lo, hi - lo) * (th - tl)
            err = abs(t(x) / interp - 1)
            if err > best[0]:
                best = (err, x)
    return best


overall = (Fraction(0), None, None)
for i in range(28):
    d = Fraction(48 * (1 + i % 7))
    beta = Fraction(2, 100) * (i % 4)
    err, x = worst(d, beta)
    if err > overall[0]:
        overall = (err, x, (int(d), float(beta)))
print(float(overall[0]), overall[1], overall[2])
