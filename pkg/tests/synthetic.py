"""Small synthetic training slices for optimisation checks."""

import numpy as np


def partial_volume_slices(n_slices=8, size=16, seed=0, edge_width=1.0):
    """Two-compartment discs with partial-volume (soft, about one pixel) boundaries.

    Returns inputs ``(S, 2, n, n)`` (T1, T2) and targets ``(S, 3, n, n)``;
    every pixel is a mixture of background, shell and core with fixed
    per-compartment values.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[:size, :size] + 0.5
    t1, t2 = (0.0, 0.7, 0.3), (0.0, 0.2, 0.9)
    targets = ((0.0, 0.3, 0.8), (0.0, 0.5, 0.6), (0.0, 0.8, 0.7))
    xs, ys = [], []
    for _ in range(n_slices):
        cx, cy = rng.uniform(0.4 * size, 0.6 * size, 2)
        r = rng.uniform(0.28 * size, 0.4 * size)
        d = np.hypot(xx - cx, yy - cy)
        outer = 1.0 / (1.0 + np.exp((d - r) / edge_width))
        inner = 1.0 / (1.0 + np.exp((d - 0.6 * r) / edge_width))
        frac = (1.0 - outer, outer - inner, inner)

        def mix(values):
            return sum(f * v for f, v in zip(frac, values))

        xs.append([mix(t1), mix(t2)])
        ys.append([mix(v) for v in targets])
    return np.array(xs), np.array(ys)
