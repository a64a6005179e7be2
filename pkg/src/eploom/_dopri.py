"""Dormand-Prince 5(4) integrator for i dc/dt = H(t) c on a two-level loop.

The kernel works in the frame rotating at w_a (H - w_a*I); callers restore the
global phase. After every accepted step the state is rescaled to unit norm and
the log of the removed factor is accumulated.
"""

import math

import numba
import numpy as np

OK = 0
UNDERFLOW = 1
TOO_MANY_STEPS = 2

MAX_STEPS = 50_000_000

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


@numba.njit(cache=True, nogil=True)
def _rhs(t, y0, y1, p):
    # p = [Delta0, g0, G0, Gamma0, g_const, gamma_const, sign, omega]; NaN const => modulated
    theta = p[6] * p[7] * t
    delta = p[0] * math.sin(theta)
    if math.isnan(p[4]):
        g = p[1] + p[2] * math.cos(theta)
    else:
        g = p[4]
    if math.isnan(p[5]):
        s = math.sin(0.5 * theta)
        gamma = p[3] * s * s
    else:
        gamma = p[5]
    h00 = delta - 0.5j * gamma
    h11 = 0.5j * gamma
    return -1j * (h00 * y0 + g * y1), -1j * (g * y0 + h11 * y1)


@numba.njit(cache=True, nogil=True)
def integrate(p, ts, c0, rtol, atol, max_step, out_c, out_logn):
    """Integrate from ``ts[0]`` through every sample time in ``ts``.

    Fills ``out_c[j]`` (unit-norm state) and ``out_logn[j]`` and returns
    ``(status, accepted_steps)``.
    """
    n = ts.shape[0]
    t = ts[0]
    y0 = c0[0]
    y1 = c0[1]
    nrm = math.sqrt(abs(y0) ** 2 + abs(y1) ** 2)
    logn = math.log(nrm)
    y0 /= nrm
    y1 /= nrm
    out_c[0, 0] = y0
    out_c[0, 1] = y1
    out_logn[0] = logn

    k10, k11 = _rhs(t, y0, y1, p)
    scale = abs(k10) + abs(k11) + p[7]
    h = min(max_step, 1e-2 / scale) if scale > 0 else max_step
    steps = 0
    for j in range(1, n):
        target = ts[j]
        while t < target:
            remaining = target - t
            h_try = min(h, max_step)
            clipped = False
            if h_try >= remaining * (1.0 - 1e-12):
                h_try = remaining
                clipped = True

            a0 = y0 + h_try * A21 * k10
            a1 = y1 + h_try * A21 * k11
            k20, k21 = _rhs(t + C2 * h_try, a0, a1, p)
            a0 = y0 + h_try * (A31 * k10 + A32 * k20)
            a1 = y1 + h_try * (A31 * k11 + A32 * k21)
            k30, k31 = _rhs(t + C3 * h_try, a0, a1, p)
            a0 = y0 + h_try * (A41 * k10 + A42 * k20 + A43 * k30)
            a1 = y1 + h_try * (A41 * k11 + A42 * k21 + A43 * k31)
            k40, k41 = _rhs(t + C4 * h_try, a0, a1, p)
            a0 = y0 + h_try * (A51 * k10 + A52 * k20 + A53 * k30 + A54 * k40)
            a1 = y1 + h_try * (A51 * k11 + A52 * k21 + A53 * k31 + A54 * k41)
            k50, k51 = _rhs(t + C5 * h_try, a0, a1, p)
            a0 = y0 + h_try * (A61 * k10 + A62 * k20 + A63 * k30 + A64 * k40 + A65 * k50)
            a1 = y1 + h_try * (A61 * k11 + A62 * k21 + A63 * k31 + A64 * k41 + A65 * k51)
            k60, k61 = _rhs(t + h_try, a0, a1, p)
            n0 = y0 + h_try * (B1 * k10 + B3 * k30 + B4 * k40 + B5 * k50 + B6 * k60)
            n1 = y1 + h_try * (B1 * k11 + B3 * k31 + B4 * k41 + B5 * k51 + B6 * k61)
            k70, k71 = _rhs(t + h_try, n0, n1, p)

            e0 = h_try * (E1 * k10 + E3 * k30 + E4 * k40 + E5 * k50 + E6 * k60 + E7 * k70)
            e1 = h_try * (E1 * k11 + E3 * k31 + E4 * k41 + E5 * k51 + E6 * k61 + E7 * k71)
            sc0 = atol + rtol * max(abs(y0), abs(n0))
            sc1 = atol + rtol * max(abs(y1), abs(n1))
            err = math.sqrt(0.5 * ((abs(e0) / sc0) ** 2 + (abs(e1) / sc1) ** 2))

            if err <= 1.0:
                t = target if clipped else t + h_try
                nrm = math.sqrt(abs(n0) ** 2 + abs(n1) ** 2)
                logn += math.log(nrm)
                y0 = n0 / nrm
                y1 = n1 / nrm
                k10 = k70 / nrm
                k11 = k71 / nrm
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                h_new = h_try * fac
                h = max(h_new, h) if clipped else h_new
                steps += 1
                if steps > MAX_STEPS:
                    return TOO_MANY_STEPS, steps
            else:
                h = h_try * max(0.2, 0.9 * err ** -0.2)
                if h < 1e-14 * max(1.0, abs(t)):
                    return UNDERFLOW, steps
        out_c[j, 0] = y0
        out_c[j, 1] = y1
        out_logn[j] = logn
    return OK, steps


def loop_params(loop) -> np.ndarray:
    nan = float("nan")
    return np.array(
        [
            loop.Delta0,
            loop.g0,
            loop.G0,
            loop.Gamma0,
            nan if loop.g_const is None else loop.g_const,
            nan if loop.gamma_const is None else loop.gamma_const,
            float(loop.direction.sign),
            loop.omega,
        ]
    )
