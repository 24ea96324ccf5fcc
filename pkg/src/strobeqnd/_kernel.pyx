# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled trajectory integrator.  Must stay operation-for-operation identical
to ``_kernel_py.integrate`` so that both backends give the same bits."""


def integrate(double[:, ::1] state, const double[:, :, ::1] noise,
              const double[::1] decay, const double[::1] amp_m,
              const double[::1] amp_o, const double[::1] amp_d,
              const double[::1] kick, double c, double s, double f, double g,
              Py_ssize_t sample_every, double[:, :, ::1] out):
    cdef Py_ssize_t n_traj = noise.shape[0]
    cdef Py_ssize_t n_steps = noise.shape[1]
    cdef Py_ssize_t b, k, j
    cdef double h = 1.0 - f
    cdef double mx, my, ox, oy, d, tx, dx, dy, ex, ey

    with nogil:
        for b in range(n_traj):
            mx = state[b, 0]
            my = state[b, 1]
            ox = state[b, 2]
            oy = state[b, 3]
            j = 0
            for k in range(n_steps):
                if k % sample_every == 0:
                    out[b, j, 0] = mx
                    out[b, j, 1] = my
                    out[b, j, 2] = ox
                    out[b, j, 3] = oy
                    j = j + 1
                d = decay[k]
                tx = d * (c * mx + s * my)
                my = d * (c * my - s * mx)
                mx = tx
                tx = d * (c * ox + s * oy)
                oy = d * (c * oy - s * ox)
                ox = tx

                mx = mx + amp_m[k] * noise[b, k, 0]
                my = my + amp_m[k] * noise[b, k, 1]
                ox = ox + amp_o[k] * noise[b, k, 2]
                oy = oy + amp_o[k] * noise[b, k, 3]

                dx = h * mx - f * ox
                dy = h * my - f * oy
                ex = amp_d[k] * noise[b, k, 4]
                ey = amp_d[k] * noise[b, k, 5]
                mx = mx - g * dx + ex
                my = my - g * dy + ey
                ox = ox + g * dx - ex
                oy = oy + g * dy - ey

                my = my + kick[k] * noise[b, k, 6]
            state[b, 0] = mx
            state[b, 1] = my
            state[b, 2] = ox
            state[b, 3] = oy
