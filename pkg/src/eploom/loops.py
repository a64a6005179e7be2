"""Time-modulated parameter loops.

A loop maps the angle theta = +-omega*t onto

    delta(theta) = Delta0 * sin(theta)
    g(theta)     = g0 + G0 * cos(theta)
    gamma(theta) = Gamma0 * sin(theta/2)**2

Either ``g`` or ``gamma`` may instead be held constant through ``g_const`` /
``gamma_const``; the corresponding amplitude (``G0`` / ``Gamma0``) then no
longer enters the Hamiltonian.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np

from . import nh_core
from .nh_core import ParamPoint

AMPLITUDES = ("Delta0", "g0", "G0", "Gamma0")


class Direction(enum.Enum):
    CCW = "ccw"
    CW = "cw"

    @property
    def sign(self) -> int:
        return 1 if self is Direction.CCW else -1

    def reversed(self) -> Direction:
        return Direction.CW if self is Direction.CCW else Direction.CCW


@dataclasses.dataclass(frozen=True)
class LoopSpec:
    Delta0: float = 0.0
    g0: float = 0.0
    G0: float = 0.0
    Gamma0: float = 0.0
    omega: float = 0.05
    omega_a: float = 0.0
    direction: Direction = Direction.CCW
    cycles: int = 1
    g_const: float | None = None
    gamma_const: float | None = None

    def __post_init__(self):
        if isinstance(self.direction, str):
            object.__setattr__(self, "direction", Direction(self.direction.lower()))
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if int(self.cycles) != self.cycles or self.cycles < 1:
            raise ValueError(f"cycles must be a positive integer, got {self.cycles}")
        vals = [self.Delta0, self.g0, self.G0, self.Gamma0, self.omega, self.omega_a]
        vals += [v for v in (self.g_const, self.gamma_const) if v is not None]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("loop amplitudes must be finite")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def duration(self) -> float:
        return self.cycles * self.period

    def theta(self, t):
        """Signed loop angle at time ``t``."""
        return self.direction.sign * self.omega * np.asarray(t, dtype=float)

    def amplitude_enters(self, name: str) -> bool:
        """Whether changing amplitude ``name`` changes the Hamiltonian anywhere on the loop."""
        if name == "G0" or name == "g0":
            return self.g_const is None
        if name == "Gamma0":
            return self.gamma_const is None
        return name == "Delta0"

    def with_(self, **changes) -> LoopSpec:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["direction"] = self.direction.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> LoopSpec:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown loop keys: {sorted(unknown)}")
        return cls(**d)


def param_arrays(loop: LoopSpec, theta):
    """Vectorized ``(delta, g, gamma)`` along ``theta``.

    The angle is reduced modulo 2*pi first, so every multiple of 2*pi maps onto
    exactly the theta = 0 point.
    """
    theta = np.remainder(np.asarray(theta, dtype=float), 2.0 * math.pi)
    delta = loop.Delta0 * np.sin(theta)
    if loop.g_const is None:
        g = loop.g0 + loop.G0 * np.cos(theta)
    else:
        g = np.full(theta.shape, float(loop.g_const))
    if loop.gamma_const is None:
        gamma = loop.Gamma0 * np.sin(0.5 * theta) ** 2
    else:
        gamma = np.full(theta.shape, float(loop.gamma_const))
    return delta, g, gamma


def param_at(loop: LoopSpec, theta: float) -> ParamPoint:
    delta, g, gamma = param_arrays(loop, theta)
    return ParamPoint(float(delta), float(g), float(gamma))


def preset(id: int, **overrides) -> LoopSpec:
    """One of the three reference trajectories.

    1: delta == 0, modulated coupling and loss.
    2: constant coupling g == 0.1, modulated detuning and loss.
    3: constant loss gamma == 0.1, modulated detuning and coupling.
    """
    if id == 1:
        base = LoopSpec(Delta0=0.0, g0=0.01, G0=0.2, Gamma0=0.2)
    elif id == 2:
        base = LoopSpec(Delta0=0.04, g0=0.1, G0=0.0, Gamma0=0.1, g_const=0.1)
    elif id == 3:
        base = LoopSpec(Delta0=0.2, g0=0.2, G0=0.2, Gamma0=0.0, gamma_const=0.1)
    else:
        raise ValueError(f"preset id must be 1, 2 or 3, got {id!r}")
    return base.with_(**overrides) if overrides else base


@dataclasses.dataclass(frozen=True)
class PerturbationSpec:
    """Offset ``lam`` of one loop amplitude from its ideal value ``x_ideal``.

    ``x_ideal=None`` means "the value already on the loop".
    """

    target: str
    lam: float = 0.0
    x_ideal: float | None = None

    def __post_init__(self):
        if self.target not in ("G0", "Gamma0", "Delta0"):
            raise ValueError(f"perturbation target must be G0, Gamma0 or Delta0, got {self.target!r}")

    def ideal(self, loop: LoopSpec) -> float:
        return getattr(loop, self.target) if self.x_ideal is None else self.x_ideal

    def actual(self, loop: LoopSpec) -> float:
        return self.ideal(loop) + self.lam

    def at(self, loop: LoopSpec, lam: float) -> LoopSpec:
        """The loop with the target amplitude set to ``ideal + lam``."""
        return loop.with_(**{self.target: self.ideal(loop) + float(lam)})


def apply_perturbation(loop: LoopSpec, pert: PerturbationSpec) -> LoopSpec:
    return loop.with_(**{pert.target: pert.actual(loop)})


def continued_splitting(loop: LoopSpec, theta, max_doublings: int = 8):
    """Energy splitting along ``theta`` with labels continued from the first sample.

    The samples are densified (globally, by doubling) until consecutive radicand
    phases differ by less than pi/2 or ``max_doublings`` is reached; that is what
    makes nearest-root continuation unambiguous between the given samples. A path
    that crosses an EP exactly produces a tie; the label is then re-anchored on
    the principal branch. Returns ``(delta_e, ties)`` at the requested samples.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.size < 2:
        return nh_core.splitting(*param_arrays(loop, theta)), np.zeros(theta.shape, bool)
    fine = theta
    factor = 1
    for _ in range(max_doublings + 1):
        f = nh_core.radicand(*param_arrays(loop, fine))
        inc = np.angle(f[1:] * np.conj(f[:-1]))
        if np.all(np.abs(inc) < 0.5 * math.pi) or factor >= 2**max_doublings:
            break
        factor *= 2
        fine = _densify(theta, factor)
    de = nh_core.splitting(*param_arrays(loop, fine))
    signs, ties = nh_core.continue_labels(de)
    cont = signs * de
    # a tie anywhere inside a coarse interval is reported at the sample closing it
    tie_coarse = np.zeros(theta.shape, dtype=bool)
    tie_coarse[1:] = np.add.reduceat(ties[1:], np.arange(0, fine.size - 1, factor)) > 0
    return cont[::factor], tie_coarse


def _densify(theta, factor):
    steps = np.linspace(0.0, 1.0, factor, endpoint=False)
    seg = theta[:-1, None] + (theta[1:] - theta[:-1])[:, None] * steps[None, :]
    return np.concatenate([seg.ravel(), theta[-1:]])
