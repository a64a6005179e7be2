"""Non-unitary evolution along a loop and eigenstate-resolved observables.

Fidelities are biorthogonal projection weights normalized to sum to one:

    c_m = l_m . psi,      F_m = |c_m|**2 / (|c_+|**2 + |c_-|**2)

so ``F_+ + F_-`` is 1 away from EPs and the result does not depend on the norm or
global phase of ``psi``. The same quantity is exposed as the population ``P_+``.

Along a trace the (+, -) labels follow the splitting continuously from the
theta = 0 principal labeling. After a loop that winds around an EP the continued
labels end up swapped relative to the starting eigenbasis; :meth:`StateTrace.final_fidelity`
reports the weights in the starting eigenbasis instead.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from typing import Sequence

import numpy as np

from . import _dopri, nh_core
from .errors import CalibrationFailed, StepSizeUnderflow
from .loops import Direction, LoopSpec, continued_splitting, param_arrays, param_at, preset

#: Descending candidate angular speeds scanned by :func:`calibrate_omega`.
DEFAULT_OMEGA_CANDIDATES = tuple(round(0.3 - 0.002 * k, 3) for k in range(146))


@dataclasses.dataclass(frozen=True)
class IntegratorOpts:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 1.0
    sample_count: int = 1001

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise ValueError("integrator tolerances and max_step must be positive")
        if self.sample_count < 2:
            raise ValueError("sample_count must be at least 2")


@dataclasses.dataclass(frozen=True)
class State:
    """Unit-norm amplitudes ``c``; the physical state is ``exp(log_norm) * c``."""

    c: np.ndarray
    log_norm: float = 0.0

    @classmethod
    def from_vector(cls, psi) -> State:
        psi = np.asarray(psi, dtype=complex)
        nrm = float(np.linalg.norm(psi))
        if not nrm > 0:
            raise ValueError("state vector must be nonzero")
        return cls(psi / nrm, math.log(nrm))

    @property
    def psi(self) -> np.ndarray:
        return math.exp(self.log_norm) * self.c


@dataclasses.dataclass
class StateTrace:
    loop: LoopSpec
    thetas: np.ndarray
    c: np.ndarray
    log_norm: np.ndarray
    delta_e: np.ndarray
    f_plus: np.ndarray
    f_minus: np.ndarray
    ep_flags: np.ndarray
    labels_swapped: bool
    steps: int = 0

    @property
    def p_plus(self) -> np.ndarray:
        return self.f_plus

    @property
    def states(self) -> list[State]:
        return [State(c, float(ln)) for c, ln in zip(self.c, self.log_norm)]

    def final_fidelity(self) -> tuple[float, float]:
        """``(F_+, F_-)`` of the last sample in the principal labeling at that point.

        For a trace ending on a multiple of 2*pi this is the starting eigenbasis.
        """
        fp, fm = self.f_plus[-1], self.f_minus[-1]
        return (fm, fp) if self.labels_swapped else (fp, fm)

    def at_theta(self, theta: float) -> int:
        """Index of the sample nearest to ``theta``."""
        return int(np.argmin(np.abs(self.thetas - theta)))

    def to_csv(self, fh=None, header_lines: Sequence[str] = ()) -> str:
        """Write the trace as CSV; missing observables become empty fields."""
        buf = io.StringIO() if fh is None else fh
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["theta_over_pi", "re_c0", "im_c0", "re_c1", "im_c1", "log_norm", "f_plus", "f_minus", "p_plus"]
        )
        for k in range(self.thetas.size):
            c0, c1 = self.c[k]
            w.writerow(
                [
                    fmt(self.thetas[k] / math.pi),
                    fmt(c0.real),
                    fmt(c0.imag),
                    fmt(c1.real),
                    fmt(c1.imag),
                    fmt(self.log_norm[k]),
                    fmt(self.f_plus[k]),
                    fmt(self.f_minus[k]),
                    fmt(self.p_plus[k]),
                ]
            )
        return buf.getvalue() if fh is None else ""


def fmt(x: float) -> str:
    """17 significant digits (round-trip exact); NaN becomes an empty field."""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x) if x == 0 else format(x, ".17g")


def weights(c, l_plus, l_minus):
    """Normalized biorthogonal weights ``(F_+, F_-)``; broadcasts over leading axes."""
    cp = np.sum(l_plus * c, axis=-1)
    cm = np.sum(l_minus * c, axis=-1)
    wp = np.abs(cp) ** 2
    wm = np.abs(cm) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        tot = wp + wm
        return wp / tot, wm / tot


def fidelity(state: State | np.ndarray, eig: nh_core.EigenSystem) -> tuple[float, float]:
    eig.require_biorthonormal()
    c = state.c if isinstance(state, State) else np.asarray(state, dtype=complex)
    fp, fm = weights(c, eig.l_plus, eig.l_minus)
    return float(fp), float(fm)


def population_plus(state: State | np.ndarray, eig: nh_core.EigenSystem) -> float:
    return fidelity(state, eig)[0]


def initial_eigenstate(loop: LoopSpec, which: str = "+") -> State:
    """Right eigenvector at theta = 0 (principal branch), normalized."""
    if which not in ("+", "-"):
        raise ValueError(f"which must be '+' or '-', got {which!r}")
    eig = nh_core.eigensystem(param_at(loop, 0.0), loop.omega_a)
    eig.require_biorthonormal()
    return State(eig.r_plus if which == "+" else eig.r_minus)


def sample_thetas(loop: LoopSpec, count: int) -> np.ndarray:
    s = np.linspace(0.0, 2.0 * math.pi * loop.cycles, count)
    return loop.direction.sign * s


def integrate(loop: LoopSpec, initial: State, thetas, opts: IntegratorOpts):
    """Raw integration to the signed sample angles ``thetas`` (first must be 0).

    Returns ``(c, log_norm, steps)`` with ``c`` in the lab frame.
    """
    thetas = np.asarray(thetas, dtype=float)
    times = loop.direction.sign * thetas / loop.omega
    if thetas[0] != 0 or np.any(np.diff(times) < 0):
        raise ValueError("sample angles must start at 0 and advance along the loop direction")
    out_c = np.empty((times.size, 2), dtype=complex)
    out_logn = np.empty(times.size)
    status, steps = _dopri.integrate(
        _dopri.loop_params(loop),
        times,
        np.asarray(initial.c, dtype=complex),
        opts.rel_tol,
        opts.abs_tol,
        opts.max_step,
        out_c,
        out_logn,
    )
    if status != _dopri.OK:
        raise StepSizeUnderflow(f"adaptive step control stalled (status {status}) after {steps} steps")
    out_logn += initial.log_norm
    if loop.omega_a != 0.0:
        # the kernel runs in the frame rotating at omega_a
        out_c *= np.exp(-1j * loop.omega_a * times)[:, None]
    return out_c, out_logn, steps


def propagate(loop: LoopSpec, initial: State, opts: IntegratorOpts | None = None, thetas=None) -> StateTrace:
    """Integrate over ``loop.cycles`` periods and evaluate F_+-, P_+ per sample.

    ``thetas`` (signed, starting at 0) overrides the uniform ``opts.sample_count`` grid.
    Samples at an EP carry NaN observables and ``ep_flags`` set.
    """
    opts = opts or IntegratorOpts()
    thetas = sample_thetas(loop, opts.sample_count) if thetas is None else np.asarray(thetas, dtype=float)
    c, logn, steps = integrate(loop, initial, thetas, opts)
    delta, g, gamma = param_arrays(loop, thetas)
    de, _ = continued_splitting(loop, thetas)
    _, _, l_plus, l_minus = nh_core.eigvecs(delta, g, gamma, de)
    fp, fm = weights(c, l_plus, l_minus)
    at_ep = nh_core.ep_mask(delta, g, gamma, de)
    fp = np.where(at_ep, np.nan, fp)
    fm = np.where(at_ep, np.nan, fm)
    principal_end = nh_core.splitting(delta[-1], g[-1], gamma[-1])
    swapped = bool(abs(de[-1] + principal_end) < abs(de[-1] - principal_end))
    return StateTrace(
        loop=loop,
        thetas=thetas,
        c=c,
        log_norm=logn,
        delta_e=de,
        f_plus=fp,
        f_minus=fm,
        ep_flags=at_ep,
        labels_swapped=swapped,
        steps=steps,
    )


def transfer_fidelity(loop: LoopSpec, which: str = "+", opts: IntegratorOpts | None = None) -> tuple[float, float]:
    """``(F_+(T), F_-(T))`` in the starting eigenbasis after all cycles.

    Skips the per-sample bookkeeping of :func:`propagate`; used by parameter maps.
    """
    opts = opts or IntegratorOpts()
    start = initial_eigenstate(loop, which)
    end = loop.direction.sign * 2.0 * math.pi * loop.cycles
    c, _, _ = integrate(loop, start, np.array([0.0, end]), opts)
    eig = nh_core.eigensystem(param_at(loop, 0.0), loop.omega_a)
    return fidelity(c[-1], eig)


@dataclasses.dataclass(frozen=True)
class Calibration:
    omega: float
    symmetric_ccw: float
    symmetric_cw: float
    chiral_ccw: float
    chiral_cw: float

    @property
    def chiral_contrast(self) -> float:
        return abs(self.chiral_cw - self.chiral_ccw)

    def passes(self, min_return=0.98, min_contrast=0.8) -> bool:
        return min(self.symmetric_ccw, self.symmetric_cw) >= min_return and self.chiral_contrast >= min_contrast


def calibration_metrics(omega: float, symmetric: LoopSpec | None = None, chiral: LoopSpec | None = None,
                        opts: IntegratorOpts | None = None) -> Calibration:
    symmetric = symmetric or preset(1)
    chiral = chiral or preset(3)
    vals = []
    for loop in (symmetric, chiral):
        for d in (Direction.CCW, Direction.CW):
            vals.append(transfer_fidelity(loop.with_(omega=omega, direction=d, cycles=1), "+", opts)[0])
    return Calibration(omega, *vals)


def calibrate_omega(candidates: Sequence[float] = DEFAULT_OMEGA_CANDIDATES, symmetric: LoopSpec | None = None,
                    chiral: LoopSpec | None = None, opts: IntegratorOpts | None = None,
                    min_return: float = 0.98, min_contrast: float = 0.8) -> Calibration:
    """Largest candidate omega meeting both gates.

    Gates: the symmetric loop (default: preset 1) returns to phi_+ with F_+(T) >=
    ``min_return`` in both directions, and the chiral loop (default: preset 3) shows
    ``|F_+(T)_CW - F_+(T)_CCW| >= min_contrast``.
    """
    candidates = sorted((float(w) for w in candidates), reverse=True)
    if not candidates:
        raise ValueError("candidate list is empty")
    if candidates[-1] <= 0:
        raise ValueError("candidate angular speeds must be positive")
    best = None
    for omega in candidates:
        cal = calibration_metrics(omega, symmetric, chiral, opts)
        if cal.passes(min_return, min_contrast):
            return cal
        score = min(cal.symmetric_ccw, cal.symmetric_cw) + cal.chiral_contrast
        if best is None or score > best[0]:
            best = (score, cal)
    raise CalibrationFailed(f"no candidate satisfies calibration; best metrics {best[1]}", best=best[1])
