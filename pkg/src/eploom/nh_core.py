"""Closed-form eigensystem of the non-Hermitian two-level Hamiltonian.

The Hamiltonian is

    H = [[w_a + delta - i*gamma/2,  g             ],
         [g,                        w_a + i*gamma/2]]

with eigenvalues ``E_pm = w_a + (delta +- dE)/2`` and splitting
``dE = (i/2) * sqrt((2*gamma + 2i*delta)**2 - 16*g**2)``.

``H`` is complex symmetric, so the left eigenvector of each eigenvalue is the
transpose of its right eigenvector. Covectors are stored as plain 1-D arrays and
paired with kets through the bilinear product ``l @ r`` (no conjugation). With
that convention ``l_n @ r_m == delta_nm`` and ``sum_n outer(r_n, l_n) == I``.

All array helpers broadcast over arbitrary leading shapes; the scalar API
(:func:`eigensystem` and friends) is built on top of them.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np

from .errors import AmbiguousContinuation, CoalescentEigensystem

#: Relative threshold on ``|dE|`` below which a point is treated as an EP.
EP_TOL = 1e-12

#: Relative tolerance used to detect an exact tie during label continuation.
TIE_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class ParamPoint:
    """Instantaneous parameters (detuning, coupling, dissipation) in units with hbar = 1."""

    delta: float
    g: float
    gamma: float

    def __post_init__(self):
        if not all(np.isfinite([self.delta, self.g, self.gamma])):
            raise ValueError(f"non-finite parameter point: {self}")


class BranchMode(enum.Enum):
    PRINCIPAL = "principal"
    CONTINUED = "continued-from-previous"


@dataclasses.dataclass(frozen=True)
class BranchConvention:
    """Which square root defines ``dE``.

    ``PRINCIPAL`` takes the root with argument in (-pi/2, pi/2]; ``CONTINUED``
    takes the root closest to ``previous``.
    """

    mode: BranchMode = BranchMode.PRINCIPAL
    previous: complex | None = None

    def __post_init__(self):
        if self.mode is BranchMode.CONTINUED and self.previous is None:
            raise ValueError("continued branch needs a previous splitting")


PRINCIPAL = BranchConvention()


@dataclasses.dataclass(frozen=True)
class EigenSystem:
    e_plus: complex
    e_minus: complex
    delta_e: complex
    r_plus: np.ndarray
    r_minus: np.ndarray
    l_plus: np.ndarray
    l_minus: np.ndarray
    at_ep: bool

    def swapped(self) -> EigenSystem:
        """The same eigensystem with the (+, -) labels exchanged."""
        return EigenSystem(
            e_plus=self.e_minus,
            e_minus=self.e_plus,
            delta_e=-self.delta_e,
            r_plus=self.r_minus,
            r_minus=self.r_plus,
            l_plus=self.l_minus,
            l_minus=self.l_plus,
            at_ep=self.at_ep,
        )

    def require_biorthonormal(self):
        if self.at_ep:
            raise CoalescentEigensystem(
                f"eigenvectors coalesce (|dE| = {abs(self.delta_e):.3g}); "
                "biorthonormal projection is undefined"
            )


# -- vectorized kernels -------------------------------------------------------


def principal_sqrt(z):
    """Square root with argument in (-pi/2, pi/2], including the signed-zero edge."""
    s = np.sqrt(np.asarray(z, dtype=complex))
    return np.where((s.real == 0) & (s.imag < 0), -s, s)


def radicand(delta, g, gamma):
    """``(2*gamma + 2i*delta)**2 - 16*g**2`` in factored form.

    The product ``4*(gamma + i*delta - 2g)*(gamma + i*delta + 2g)`` vanishes exactly on
    the EP set (e.g. gamma == 2g, delta == 0), which the expanded form does not.
    """
    delta = np.asarray(delta, dtype=float)
    g = np.asarray(g, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    w = gamma + 1j * delta
    return 4.0 * (w - 2.0 * g) * (w + 2.0 * g)


def splitting(delta, g, gamma):
    """Principal-branch energy splitting ``E_plus - E_minus``."""
    return 0.5j * principal_sqrt(radicand(delta, g, gamma))


def ep_mask(delta, g, gamma, delta_e=None, tol=EP_TOL):
    if delta_e is None:
        delta_e = splitting(delta, g, gamma)
    scale = np.maximum(1.0, np.abs(gamma) + np.abs(delta) + np.abs(g))
    return np.abs(delta_e) < tol * scale


def eigvecs(delta, g, gamma, delta_e):
    """Unit right eigenvectors and dual covectors for the labelled splitting.

    Returns ``(r_plus, r_minus, l_plus, l_minus)``, each with a trailing axis of
    length 2. The right vectors are proportional to ``[A_pm, 4g]`` with
    ``A_pm = 2*delta - 2i*gamma +- 2*dE``. Since ``A_plus*A_minus == -16 g**2``, the
    vector of the smaller ``|A|`` is built as ``[-4g, A_other]`` to avoid cancellation.
    Covectors are NaN where the vector is self-orthogonal (the EP).
    """
    delta = np.asarray(delta, dtype=float)
    g = np.asarray(g, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    delta_e = np.asarray(delta_e, dtype=complex)
    u = 2.0 * (delta - 1j * gamma)
    a_plus = u + 2.0 * delta_e
    a_minus = u - 2.0 * delta_e
    four_g = (4.0 * g).astype(complex)

    plus_big = np.abs(a_plus) >= np.abs(a_minus)
    big = np.where(plus_big, a_plus, a_minus)
    v_big = np.stack([big, four_g], axis=-1)
    v_small = np.stack([-four_g, big], axis=-1)
    r_plus = np.where(plus_big[..., None], v_big, v_small)
    r_minus = np.where(plus_big[..., None], v_small, v_big)

    # zero vectors only occur at the diabolic point delta = g = gamma = 0
    r_plus = _unit_or_basis(r_plus, 0)
    r_minus = _unit_or_basis(r_minus, 1)

    with np.errstate(divide="ignore", invalid="ignore"):
        l_plus = r_plus / np.sum(r_plus * r_plus, axis=-1, keepdims=True)
        l_minus = r_minus / np.sum(r_minus * r_minus, axis=-1, keepdims=True)
    at_ep = ep_mask(delta, g, gamma, delta_e)
    l_plus = np.where(at_ep[..., None], np.nan, l_plus)
    l_minus = np.where(at_ep[..., None], np.nan, l_minus)
    return r_plus, r_minus, l_plus, l_minus


def _unit_or_basis(v, k):
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    basis = np.zeros(2, dtype=complex)
    basis[k] = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = v / norm
    return np.where(norm > 0, unit, basis)


def continue_labels(delta_e):
    """Sign pattern that makes a sampled principal-branch splitting continuous.

    Each sample takes whichever of ``+-dE_k`` lies closer to the previous continued
    value. An exact tie (a path crossing an EP between samples) re-anchors that
    sample on the principal branch. Returns ``(signs, ties)``.
    """
    delta_e = np.asarray(delta_e, dtype=complex)
    n = delta_e.size
    prod = delta_e[1:] * np.conj(delta_e[:-1])
    mag = np.abs(prod)
    ties = np.zeros(n, dtype=bool)
    ties[1:] = (mag == 0) | (np.abs(prod.real) <= TIE_TOL * mag)
    local = np.ones(n)
    local[1:] = np.where(ties[1:] | (prod.real > 0), 1.0, -1.0)
    running = np.cumprod(local)
    anchor = np.maximum.accumulate(np.where(ties, np.arange(n), 0))
    return running * running[anchor], ties


# -- scalar API ---------------------------------------------------------------


def hamiltonian(p: ParamPoint, omega_a: float = 0.0) -> np.ndarray:
    return np.array(
        [
            [omega_a + p.delta - 0.5j * p.gamma, p.g],
            [p.g, omega_a + 0.5j * p.gamma],
        ],
        dtype=complex,
    )


def energy_splitting(p: ParamPoint, branch: BranchConvention = PRINCIPAL) -> complex:
    de = complex(splitting(p.delta, p.g, p.gamma))
    if branch.mode is BranchMode.CONTINUED and abs(-de - branch.previous) < abs(de - branch.previous):
        de = -de
    return de


def is_ep(p: ParamPoint, tol: float = EP_TOL) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return bool(ep_mask(p.delta, p.g, p.gamma, tol=tol))


def eigensystem(p: ParamPoint, omega_a: float = 0.0, branch: BranchConvention = PRINCIPAL) -> EigenSystem:
    de = energy_splitting(p, branch)
    r_plus, r_minus, l_plus, l_minus = eigvecs(p.delta, p.g, p.gamma, de)
    centre = omega_a + 0.5 * p.delta
    return EigenSystem(
        e_plus=centre + 0.5 * de,
        e_minus=centre - 0.5 * de,
        delta_e=de,
        r_plus=r_plus,
        r_minus=r_minus,
        l_plus=l_plus,
        l_minus=l_minus,
        at_ep=bool(ep_mask(p.delta, p.g, p.gamma, de)),
    )


def relabel_continuous(previous: EigenSystem, candidate: EigenSystem) -> EigenSystem:
    """Swap the candidate's labels if that brings its splitting closer to ``previous``."""
    keep = abs(candidate.delta_e - previous.delta_e)
    swap = abs(-candidate.delta_e - previous.delta_e)
    if abs(keep - swap) <= TIE_TOL * max(keep, swap) or (keep == 0 and swap == 0):
        raise AmbiguousContinuation(
            f"both labelings are {keep:.6g} from the previous splitting {previous.delta_e:.6g}"
        )
    return candidate.swapped() if swap < keep else candidate
