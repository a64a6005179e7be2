"""Sensing susceptibilities along loops.

Eigenvalue-based: derivatives of the splitting with respect to a loop amplitude,

    chi_G0     = d dE / d G0     = 4 g cos(theta) / dE
    chi_Gamma0 = d dE / d Gamma0 = -(gamma + i delta) sin(theta/2)**2 / dE

which follow from ``dE**2 = 4 g**2 - (gamma + i delta)**2``. Both are exactly 0 when
the amplitude does not enter the loop (held constant by ``g_const`` / ``gamma_const``).

Eigenstate-based: the derivative of the normalized population ``P_+(theta, lam)``
across a grid of perturbation strengths, estimated by finite differences
(central in the interior, one-sided at the two ends).
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import io
import math
import os
from typing import Sequence

import numpy as np

from . import nh_core
from .errors import EploomError
from .evolve import IntegratorOpts, fmt, initial_eigenstate, propagate
from .loops import LoopSpec, PerturbationSpec, continued_splitting, param_arrays

#: Default perturbation grid.
DEFAULT_LAMBDAS = np.linspace(-0.4, 0.4, 201)

KINDS = {"G0": "chi_G0", "Gamma0": "chi_Gamma0"}


def default_lambdas() -> np.ndarray:
    return DEFAULT_LAMBDAS.copy()


def _analytic(loop: LoopSpec, target: str, theta, delta_e):
    delta, g, gamma = param_arrays(loop, theta)
    theta = np.asarray(theta, dtype=float)
    singular = nh_core.ep_mask(delta, g, gamma, delta_e)
    if not loop.amplitude_enters(target):
        return np.zeros(np.shape(delta_e), dtype=complex), singular
    if target == "G0":
        num = 4.0 * g * np.cos(theta)
    elif target == "Gamma0":
        num = -(gamma + 1j * delta) * np.sin(0.5 * theta) ** 2
    else:
        raise ValueError(f"no analytic susceptibility for {target!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        chi = num / delta_e
    chi = np.where(singular, complex(math.nan, math.nan), chi)
    return chi.astype(complex), singular


def chi_g0(loop: LoopSpec, theta):
    """``d dE / d G0`` on the principal branch at ``theta``; NaN at EPs (see :func:`is_singular`)."""
    de = nh_core.splitting(*param_arrays(loop, theta))
    chi, _ = _analytic(loop, "G0", theta, de)
    return chi[()] if chi.ndim == 0 else chi


def chi_gamma0(loop: LoopSpec, theta):
    """``d dE / d Gamma0`` on the principal branch at ``theta``; NaN at EPs."""
    de = nh_core.splitting(*param_arrays(loop, theta))
    chi, _ = _analytic(loop, "Gamma0", theta, de)
    return chi[()] if chi.ndim == 0 else chi


def is_singular(loop: LoopSpec, theta):
    """True where the loop sits on an EP, so the analytic susceptibilities diverge."""
    return nh_core.ep_mask(*param_arrays(loop, theta))


def _check_grid(name, values, min_size=1):
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < min_size:
        raise ValueError(f"{name} needs at least {min_size} point(s)")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} must be finite")
    if values.size > 1 and not (np.all(np.diff(values) > 0) or np.all(np.diff(values) < 0)):
        raise ValueError(f"{name} must be strictly monotone")
    return values


def _signed(loop: LoopSpec, progress):
    """Signed loop angles for nonnegative progress values along the loop direction."""
    progress = np.asarray(progress, dtype=float)
    if np.any(progress < 0):
        raise ValueError("theta grid values must be nonnegative (angle travelled along the loop)")
    return loop.direction.sign * progress


@dataclasses.dataclass
class Landscape:
    """Splitting and analytic susceptibility on a (theta, lambda) grid.

    Arrays are indexed ``[i_theta, i_lambda]``; ``thetas`` hold the travelled angle.
    """

    loop: LoopSpec
    target: str
    thetas: np.ndarray
    lambdas: np.ndarray
    delta_e: np.ndarray
    chi: np.ndarray
    singular: np.ndarray

    @property
    def kind(self) -> str:
        return KINDS[self.target]

    def to_csv(self, fh=None, header_lines: Sequence[str] = ()) -> str:
        rows = (
            [
                fmt(self.thetas[i] / math.pi),
                fmt(self.lambdas[j]),
                fmt(self.delta_e[i, j].real),
                fmt(self.delta_e[i, j].imag),
                fmt(self.chi[i, j].real),
                fmt(self.chi[i, j].imag),
                int(self.singular[i, j]),
            ]
            for i in range(self.thetas.size)
            for j in range(self.lambdas.size)
        )
        header = ["theta_over_pi", "lambda", "re_delta_e", "im_delta_e", "re_chi", "im_chi", "singular_flag"]
        return _write_csv(fh, header_lines, header, rows)

    def slice_at(self, theta: float) -> Landscape:
        i = int(np.argmin(np.abs(self.thetas - theta)))
        return dataclasses.replace(
            self,
            thetas=self.thetas[i : i + 1],
            delta_e=self.delta_e[i : i + 1],
            chi=self.chi[i : i + 1],
            singular=self.singular[i : i + 1],
        )


def splitting_landscape(loop: LoopSpec, pert: PerturbationSpec | str, lambda_grid=None, theta_grid=None) -> Landscape:
    """Continued splitting and the matching analytic ``chi`` for each perturbed loop.

    ``pert`` names the perturbed amplitude (``G0`` or ``Gamma0``); its ``x_ideal``,
    if set, replaces the loop's own value as the unperturbed point.
    Along each column the labels are continued from the principal branch at theta = 0.
    """
    pert = PerturbationSpec(pert) if isinstance(pert, str) else pert
    if pert.target not in KINDS:
        raise ValueError(f"analytic susceptibility is defined for G0 and Gamma0, not {pert.target!r}")
    lambdas = _check_grid("lambda grid", DEFAULT_LAMBDAS if lambda_grid is None else lambda_grid)
    progress = _check_grid("theta grid", np.linspace(0, 2 * math.pi, 201) if theta_grid is None else theta_grid)
    theta = _signed(loop, progress)
    de = np.empty((theta.size, lambdas.size), dtype=complex)
    chi = np.empty_like(de)
    sing = np.empty(de.shape, dtype=bool)
    for j, lam in enumerate(lambdas):
        lp = pert.at(loop, lam)
        col, _ = continued_splitting(lp, theta)
        de[:, j] = col
        chi[:, j], sing[:, j] = _analytic(lp, pert.target, theta, col)
    return Landscape(loop, pert.target, progress, lambdas, de, chi, sing)


@dataclasses.dataclass
class StateSusceptibility:
    """Population ``P_+`` and its lambda-derivative on a (theta, lambda) grid.

    ``failed`` marks lambda columns whose propagation could not run (for example an
    initial state at an EP); their entries are NaN.
    """

    loop: LoopSpec
    target: str
    thetas: np.ndarray
    lambdas: np.ndarray
    population: np.ndarray
    chi: np.ndarray
    failed: np.ndarray

    kind = "chi_state"

    @property
    def singular(self) -> np.ndarray:
        return ~np.isfinite(self.chi)

    def peak(self, theta: float, window: tuple[float, float] | None = None) -> tuple[float, float]:
        """``(max |chi|, lambda at max)`` at the sample nearest ``theta``, optionally within ``window``."""
        i = int(np.argmin(np.abs(self.thetas - theta)))
        a = np.abs(self.chi[i])
        mask = np.isfinite(a)
        if window is not None:
            mask &= (self.lambdas >= window[0]) & (self.lambdas <= window[1])
        if not mask.any():
            return math.nan, math.nan
        k = np.flatnonzero(mask)[np.argmax(a[mask])]
        return float(a[k]), float(self.lambdas[k])

    def to_csv(self, fh=None, header_lines: Sequence[str] = ()) -> str:
        rows = (
            [
                fmt(self.thetas[i] / math.pi),
                fmt(self.lambdas[j]),
                fmt(self.population[i, j]),
                fmt(self.chi[i, j]),
                int(not math.isfinite(self.chi[i, j])),
            ]
            for i in range(self.thetas.size)
            for j in range(self.lambdas.size)
        )
        return _write_csv(fh, header_lines, ["theta_over_pi", "lambda", "p_plus", "chi_state", "singular_flag"], rows)

    def slice_at(self, theta: float) -> StateSusceptibility:
        i = int(np.argmin(np.abs(self.thetas - theta)))
        return dataclasses.replace(
            self, thetas=self.thetas[i : i + 1], population=self.population[i : i + 1], chi=self.chi[i : i + 1]
        )


def lambda_derivative(values, lambdas) -> np.ndarray:
    """d/d lambda along the last axis: central inside, one-sided at both ends.

    Differences are plain two-point quotients, so a lambda-independent input gives
    exact zeros.
    """
    v = np.asarray(values, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (lam[2:] - lam[:-2])
    out[..., 0] = (v[..., 1] - v[..., 0]) / (lam[1] - lam[0])
    out[..., -1] = (v[..., -1] - v[..., -2]) / (lam[-1] - lam[-2])
    return out


def eigenstate_susceptibility(
    loop: LoopSpec,
    pert: PerturbationSpec | str,
    lambda_grid=None,
    theta_grid=None,
    initial: str = "-",
    opts: IntegratorOpts | None = None,
    jobs: int | None = None,
) -> StateSusceptibility:
    """Finite-difference susceptibility of ``P_+`` with respect to the perturbation.

    One trajectory is propagated per lambda from the chosen eigenstate at theta = 0.
    ``theta_grid`` holds nonnegative travelled angles; the default samples one cycle
    at 201 points. Columns run on up to ``jobs`` threads and are assembled in lambda order.
    """
    pert = PerturbationSpec(pert) if isinstance(pert, str) else pert
    if initial not in ("+", "-"):
        raise ValueError(f"initial must be '+' or '-', got {initial!r}")
    lambdas = _check_grid("lambda grid", DEFAULT_LAMBDAS if lambda_grid is None else lambda_grid, min_size=2)
    progress = _check_grid("theta grid", np.linspace(0, 2 * math.pi, 201) if theta_grid is None else theta_grid)
    if np.any(np.diff(progress) < 0):
        raise ValueError("theta grid must increase")
    opts = opts or IntegratorOpts()
    theta = _signed(loop, progress)
    with_zero = theta[0] != 0
    samples = np.concatenate([[0.0], theta]) if with_zero else theta

    def column(lam):
        lp = pert.at(loop, lam)
        try:
            tr = propagate(lp, initial_eigenstate(lp, initial), opts, thetas=samples)
        except EploomError:
            return None
        return tr.f_plus[1:] if with_zero else tr.f_plus

    if not loop.amplitude_enters(pert.target):
        # the loop is identical for every lambda
        cols = [column(lambdas[0])] * lambdas.size
    else:
        workers = max(1, min(jobs or os.cpu_count() or 1, lambdas.size))
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            cols = list(pool.map(column, lambdas))
    failed = np.array([c is None for c in cols])
    pop = np.full((progress.size, lambdas.size), math.nan)
    for j, c in enumerate(cols):
        if c is not None:
            pop[:, j] = c
    chi = lambda_derivative(pop, lambdas)
    chi[:, failed] = math.nan
    return StateSusceptibility(loop, pert.target, progress, lambdas, pop, chi, failed)


def _write_csv(fh, header_lines, header, rows) -> str:
    buf = io.StringIO() if fh is None else fh
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue() if fh is None else ""
