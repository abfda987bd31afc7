"""How many dimensions does a signal need?

Runs the false-nearest-neighbour test on three reference signals: a sine
(needs 2), the Lorenz x coordinate (needs about 3) and white noise (never
settles).
"""

import math

from netphase.dynamics import autocorrelation_delay, estimate_dimension, fnn_curve, lorenz, sine, uniform_noise


def show(label, series, T):
    curve = fnn_curve(series, 8, T)
    bars = "  ".join(f"d={p.d}:{p.fraction:.3f}" for p in curve.points)
    dim = estimate_dimension(curve, 0.05)
    print(f"{label:<8} T={T:<3} estimate={dim}\n  {bars}")


period = 50 * math.sqrt(2)
show("sine", sine(1000, period), round(period / 4))

x = lorenz(10_000)[:, 0]
show("lorenz", x, autocorrelation_delay(x))

noise = uniform_noise(2000, seed=0)
show("noise", noise, autocorrelation_delay(noise))
