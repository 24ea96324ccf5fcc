"""Pure-numpy trajectory integrator, vectorized across the trajectory batch.

Reference implementation of the compiled ``_kernel`` module; see
``integrate`` there for the argument contract.
"""

import numpy as np


def integrate(state, noise, decay, amp_m, amp_o, amp_d, kick, c, s, f, g, sample_every, out):
    h = 1.0 - f
    mx = state[:, 0].copy()
    my = state[:, 1].copy()
    ox = state[:, 2].copy()
    oy = state[:, 3].copy()
    n_steps = noise.shape[1]
    j = 0
    for k in range(n_steps):
        if k % sample_every == 0:
            out[:, j, 0] = mx
            out[:, j, 1] = my
            out[:, j, 2] = ox
            out[:, j, 3] = oy
            j += 1
        z = noise[:, k, :]
        d = decay[k]
        tx = d * (c * mx + s * my)
        my = d * (c * my - s * mx)
        mx = tx
        tx = d * (c * ox + s * oy)
        oy = d * (c * oy - s * ox)
        ox = tx

        mx = mx + amp_m[k] * z[:, 0]
        my = my + amp_m[k] * z[:, 1]
        ox = ox + amp_o[k] * z[:, 2]
        oy = oy + amp_o[k] * z[:, 3]

        dx = h * mx - f * ox
        dy = h * my - f * oy
        ex = amp_d[k] * z[:, 4]
        ey = amp_d[k] * z[:, 5]
        mx = mx - g * dx + ex
        my = my - g * dy + ey
        ox = ox + g * dx - ex
        oy = oy + g * dy - ey

        my = my + kick[k] * z[:, 6]
    state[:, 0] = mx
    state[:, 1] = my
    state[:, 2] = ox
    state[:, 3] = oy
    return None
