"""Winding of the energy splitting and a geometric encirclement oracle.

The winding number of a closed loop is

    nu = -(1/2pi) * sum_k arg(dE_{k+1} / dE_k)

with ``dE`` continued along the samples. Because ``dE = (i/2) sqrt(f)`` with the
radicand ``f = (2*gamma + 2i*delta)**2 - 16*g**2``, the splitting turns by half the
angle of ``f``, so ``nu == -w_f / 2`` where ``w_f`` is the integer winding of ``f``
about the origin. :func:`encircles_ep` computes ``w_f`` by counting signed crossings of
a ray, without any phase arithmetic, which makes it an independent check.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import nh_core
from .errors import LoopThroughEP, RadicandHitsOrigin, RefinementCapExceeded
from .loops import LoopSpec, param_arrays
from .nh_core import ParamPoint

#: Largest tolerated distance of ``nu`` from a half-integer.
RESIDUAL_TOL = 1e-6


@dataclasses.dataclass(frozen=True)
class WindingResult:
    nu: float
    nu_quantized: float
    samples_used: int
    residual: float


@dataclasses.dataclass(frozen=True)
class EncircleReport:
    f_winding: int | None
    crosses_origin: bool

    @property
    def nu(self) -> float | None:
        """Winding of the splitting implied by the radicand winding."""
        return None if self.f_winding is None else -0.5 * self.f_winding + 0.0


def loop_thetas(loop: LoopSpec, samples: int) -> np.ndarray:
    """``samples`` signed angles covering the loop, closing point included."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    return loop.direction.sign * np.linspace(0.0, 2.0 * math.pi * loop.cycles, samples)


def winding_of_points(delta, g, gamma) -> float:
    """Raw ``nu`` of the polyline through the given parameter samples.

    The caller is responsible for the samples being dense enough; reversing the
    sample order negates the result exactly.
    """
    de = nh_core.splitting(delta, g, gamma)
    signs, _ = nh_core.continue_labels(de)
    return -math.fsum(phase_steps(signs * de).tolist()) / (2.0 * math.pi)


def phase_steps(z) -> np.ndarray:
    """``arg(z[k+1] / z[k])`` in (-pi, pi].

    Built from separate real products so that reversing ``z`` negates every step
    bit for bit (a fused complex multiply does not guarantee that).
    """
    z = np.asarray(z, dtype=complex)
    a, b = z[:-1], z[1:]
    re = b.real * a.real + b.imag * a.imag
    im = b.imag * a.real - b.real * a.imag
    return np.arctan2(im, re)


def _quantize(nu: float) -> tuple[float, float]:
    q = round(2.0 * nu) / 2.0
    return q, abs(nu - q)


def winding_number(loop: LoopSpec, initial_samples: int = 256, max_doublings: int = 12) -> WindingResult:
    """Winding number of the continued splitting over the loop.

    Samples are doubled until every radicand phase step is below pi/2 and the
    sum lies within :data:`RESIDUAL_TOL` of a half-integer.
    """
    n = int(initial_samples)
    if n < 2:
        raise ValueError("initial_samples must be at least 2")
    for _ in range(max_doublings + 1):
        delta, g, gamma = param_arrays(loop, loop_thetas(loop, n))
        f = nh_core.radicand(delta, g, gamma)
        hit = nh_core.ep_mask(delta, g, gamma)
        hit[1:] |= chord_through_origin(f)
        if hit.any():
            k = int(np.argmax(hit))
            raise LoopThroughEP(
                f"loop passes through EP near (delta, g, gamma) = ({delta[k]:.6g}, {g[k]:.6g}, {gamma[k]:.6g})"
            )
        steps = np.abs(np.angle(f[1:] * np.conj(f[:-1])))
        if np.all(steps < 0.5 * math.pi):
            nu = winding_of_points(delta, g, gamma)
            q, res = _quantize(nu)
            if res <= RESIDUAL_TOL:
                return WindingResult(nu=nu, nu_quantized=q, samples_used=n, residual=res)
        n = 2 * (n - 1) + 1
    raise RefinementCapExceeded(f"winding did not converge with {n} samples")


def crossing_winding(z, centre: complex = 0.0) -> int:
    """Winding of the closed polyline ``z`` about ``centre`` by ray crossings.

    Counts signed crossings of the horizontal ray to the right of ``centre`` with a
    half-open rule (a vertex on the ray counts as lying above it).
    """
    z = np.asarray(z, dtype=complex) - centre
    if z[0] != z[-1]:
        z = np.append(z, z[0])
    x0, y0 = z.real[:-1], z.imag[:-1]
    x1, y1 = z.real[1:], z.imag[1:]
    up = (y0 < 0) & (y1 >= 0)
    down = (y0 >= 0) & (y1 < 0)
    cross = up | down
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (0.0 - y0) * (x1 - x0) / (y1 - y0)
    right = cross & (xc > 0)
    return int(np.count_nonzero(right & up)) - int(np.count_nonzero(right & down))


def chord_through_origin(z, rel_tol: float = 1e-12) -> np.ndarray:
    """Per segment: does the chord between consecutive points pass through 0?

    A chord does when its endpoints are (to ``rel_tol``) collinear with the origin
    and lie on opposite sides of it, or when an endpoint is 0.
    """
    z = np.asarray(z, dtype=complex)
    a, b = z[:-1], z[1:]
    cross = a.real * b.imag - a.imag * b.real
    dot = a.real * b.real + a.imag * b.imag
    return (np.abs(cross) <= rel_tol * np.abs(a) * np.abs(b)) & (dot <= 0)


def encircles_ep(loop: LoopSpec, samples: int = 4096, strict: bool = True) -> EncircleReport:
    """Integer winding of the radicand about the origin along the sampled loop.

    A radicand that touches the origin (a sample or a chord through it) raises
    :class:`RadicandHitsOrigin` when ``strict``; otherwise the report has
    ``crosses_origin`` set and no winding.
    """
    delta, g, gamma = param_arrays(loop, loop_thetas(loop, samples))
    f = nh_core.radicand(delta, g, gamma)
    if chord_through_origin(f).any() or nh_core.ep_mask(delta, g, gamma).any():
        if strict:
            raise RadicandHitsOrigin("the splitting radicand reaches zero on the loop")
        return EncircleReport(f_winding=None, crosses_origin=True)
    return EncircleReport(f_winding=crossing_winding(f), crosses_origin=False)


def grazing_winding(loop: LoopSpec, samples: int = 4096, offset: float = 1e-9) -> int | None:
    """Radicand winding for a loop that touches the origin, if it is unambiguous.

    The winding is taken about four points at distance ``offset`` (relative to the
    radicand scale) around the origin. If they all agree, the touching loop is
    classified by that common value (for example a real-valued radicand gives 0);
    otherwise None.
    """
    f = nh_core.radicand(*param_arrays(loop, loop_thetas(loop, samples)))
    eps = offset * max(1.0, float(np.max(np.abs(f))))
    values = {crossing_winding(f, eps * c) for c in (1, 1j, -1, -1j)}
    return values.pop() if len(values) == 1 else None


def ep_locations(g: float | None = None, *, gamma: float | None = None) -> list[ParamPoint]:
    """Real EPs at fixed coupling ``g`` or fixed loss ``gamma``.

    The real EP set is ``delta == 0, gamma == +-2g``. At fixed ``g`` this gives
    ``(0, g, +-2g)``; at fixed ``gamma`` it gives ``(0, +-gamma/2, gamma)``. The
    degenerate value 0 yields the single point at the origin.
    """
    if (g is None) == (gamma is None):
        raise ValueError("give exactly one of g or gamma")
    if g is not None:
        pts = [ParamPoint(0.0, g, 2.0 * g), ParamPoint(0.0, g, -2.0 * g)]
    else:
        pts = [ParamPoint(0.0, 0.5 * gamma, gamma), ParamPoint(0.0, -0.5 * gamma, gamma)]
    return pts[:1] if pts[0] == pts[1] else pts


def loop_ep_locations(loop: LoopSpec) -> list[ParamPoint]:
    """EP candidates for a loop holding ``g`` or ``gamma`` constant."""
    if loop.g_const is not None:
        return ep_locations(loop.g_const)
    if loop.gamma_const is not None:
        return ep_locations(gamma=loop.gamma_const)
    raise ValueError("loop holds neither g nor gamma constant")
