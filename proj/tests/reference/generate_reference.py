"""Reference values for the unit tests, computed with mpmath at 40 digits.

Run once; the printed tables are pasted into tests/reference_values.hpp.
"""
import mpmath as mp
import numpy as np
from scipy import special

mp.mp.dps = 40


def sj(l, x):
    return mp.sqrt(mp.pi / (2 * x)) * mp.besselj(l + mp.mpf(1) / 2, x)


def sy(l, x):
    return mp.sqrt(mp.pi / (2 * x)) * mp.bessely(l + mp.mpf(1) / 2, x)


def d(f, l, x):
    return f(l - 1, x) - (l + 1) / x * f(l, x) if l > 0 else -f(1, x)


def fmt(v):
    return mp.nstr(v, 20)


print("// l, x, j, y, j', y'")
for l, x in [(0, 1), (1, 1), (2, 0.5), (5, 0.5), (10, 5), (20, 10), (40, 50), (60, 60),
             (60, 1), (3, 60), (0, 60), (30, 0.1), (7, 12.5), (50, 25)]:
    x = mp.mpf(x)
    print("    {%d, %s, %s, %s, %s, %s}," % (l, fmt(x), fmt(sj(l, x)), fmt(sy(l, x)),
                                            fmt(d(sj, l, x)), fmt(d(sy, l, x))))

print("// l, m, theta, phi, re Y, im Y")
for l, m, th, ph in [(0, 0, 0.3, 0.1), (1, 0, 0.0, 0.0), (1, 1, mp.pi / 2, 0.0), (1, -1, 1.1, 2.3),
                     (2, 1, 0.7, -0.4), (5, 3, 1.9, 0.8), (5, -3, 1.9, 0.8), (10, 7, 2.5, 3.0),
                     (20, -13, 0.4, 1.7), (40, 40, mp.pi / 2, 0.25)]:
    y = mp.spherharm(l, m, th, ph)
    ys = special.sph_harm_y(l, m, float(th), float(ph))
    assert abs(complex(y) - ys) < 1e-12 * max(1.0, abs(ys))
    print("    {%d, %d, %s, %s, %s, %s}," % (l, m, fmt(mp.mpf(th)), fmt(mp.mpf(ph)), fmt(y.real), fmt(y.imag)))


def mie_sigma(k, a, h, soft):
    x = mp.mpf(k) * a
    s = mp.mpf(0)
    for l in range(0, 80):
        j, yv = sj(l, x), sy(l, x)
        hh = j + 1j * yv
        if soft:
            R = -j / hh
        else:
            jp, hp = d(sj, l, x), d(sj, l, x) + 1j * d(sy, l, x)
            R = -(k * jp + h * j) / (k * hp + h * hh)
        s += (2 * l + 1) * abs(R) ** 2
    return 4 * mp.pi / mp.mpf(k) ** 2 * s


print("// Mie cross sections")
print("soft ka=1:", fmt(mie_sigma(1, 1, 0, True)))
print("soft ka=0.5:", fmt(mie_sigma(0.5, 1, 0, True)))
print("impedance h=1 ka=2:", fmt(mie_sigma(2, 1, 1, False)))
print("impedance h=1+i ka=2 (k=2, a=1):", fmt(mie_sigma(2, 1, mp.mpc(1, 1), False)))
print("impedance h=1 k=1.5 a=2:", fmt(mie_sigma(1.5, 2, 1, False)))
