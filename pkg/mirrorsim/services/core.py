"""Units, truncated Fock-space operators and mirror states.

Internal units are ħ = ω_m = σ = 1. `nondimensionalize` is the only place
SI quantities enter; every other service consumes `SimParams`.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy.special import gammaln
from scipy.stats import poisson

from mirrorsim.config import settings
from mirrorsim.errors import ParameterError, TruncationError
from mirrorsim.schemas import OperatorKind, PhysicalParams, SimParams

logger = logging.getLogger(__name__)


def _readonly(array: np.ndarray, ndim: int, what: str) -> np.ndarray:
    data = np.array(array, dtype=complex)
    if data.ndim != ndim:
        raise ParameterError(f"{what} must be {ndim}-dimensional, got shape {data.shape}")
    data.setflags(write=False)
    return data


@dataclass(frozen=True)
class MirrorState:
    """Mirror amplitudes in the number basis |0>..|N-1>; not necessarily normalized."""

    amps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amps", _readonly(self.amps, 1, "amps"))

    @property
    def n_trunc(self) -> int:
        return self.amps.shape[0]

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    @classmethod
    def basis(cls, n: int, n_trunc: int) -> "MirrorState":
        if not 0 <= n < n_trunc:
            raise ParameterError(f"basis index {n} outside 0..{n_trunc - 1}")
        amps = np.zeros(n_trunc, dtype=complex)
        amps[n] = 1.0
        return cls(amps)


@dataclass(frozen=True)
class FockOperator:
    entries: np.ndarray
    kind: OperatorKind = OperatorKind.GENERAL

    def __post_init__(self):
        entries = _readonly(self.entries, 2, "entries")
        if entries.shape[0] != entries.shape[1]:
            raise ParameterError(f"operator must be square, got shape {entries.shape}")
        object.__setattr__(self, "entries", entries)

    @property
    def n_trunc(self) -> int:
        return self.entries.shape[0]

    def dagger(self) -> "FockOperator":
        kind = {
            OperatorKind.ANNIHILATION: OperatorKind.CREATION,
            OperatorKind.CREATION: OperatorKind.ANNIHILATION,
        }.get(self.kind, self.kind)
        return FockOperator(self.entries.conj().T, kind)

    def is_hermitian(self, atol: float = 1e-14) -> bool:
        return bool(np.all(np.abs(self.entries - self.entries.conj().T) <= atol))

    def apply(self, state: MirrorState) -> MirrorState:
        if state.n_trunc != self.n_trunc:
            raise ParameterError(f"dimension mismatch: operator {self.n_trunc}, state {state.n_trunc}")
        return MirrorState(self.entries @ state.amps)


def nondimensionalize(
    p: PhysicalParams,
    n_trunc: int,
    t_grid: Union[Sequence[float], np.ndarray],
) -> SimParams:
    """Convert SI parameters and a time grid in seconds to SimParams."""
    if n_trunc < 2:
        raise ParameterError(f"n_trunc must be >= 2, got {n_trunc}")
    seconds = np.asarray(t_grid, dtype=float)
    if seconds.ndim != 1 or seconds.size == 0:
        raise ParameterError("t_grid must be a non-empty sequence")
    if np.any(np.diff(seconds) <= 0):
        raise ParameterError("t_grid must be strictly increasing")

    eta_hat = p.eta * p.sigma**2 / p.omega_m
    try:
        return SimParams(
            kappa=p.kappa,
            eta_hat=eta_hat,
            n_trunc=n_trunc,
            t_grid=tuple(float(t) for t in seconds * p.omega_m),
        )
    except ValidationError as e:
        raise ParameterError(e.errors()[0]["msg"]) from e


def redimensionalize(sim: SimParams, p: PhysicalParams) -> Tuple[float, np.ndarray]:
    """Return (η in s^-1 m^-2, time grid in seconds) for the mirror described by `p`."""
    eta = sim.eta_hat * p.omega_m / p.sigma**2
    return eta, sim.times / p.omega_m


def make_operator(kind: Union[OperatorKind, str], n_trunc: int, kappa: float = 0.0) -> FockOperator:
    """Dense operator on the first `n_trunc` number states.

    Hamiltonians are in units of ħω_m: H^A = b†b − κ(b + b†), H^B = b†b.
    """
    try:
        kind = OperatorKind(kind)
    except ValueError as e:
        raise ParameterError(f"unknown operator kind {kind!r}") from e
    if n_trunc < 2:
        raise ParameterError(f"n_trunc must be >= 2, got {n_trunc}")

    b = np.diag(np.sqrt(np.arange(1, n_trunc, dtype=float)), k=1).astype(complex)
    number = np.diag(np.arange(n_trunc, dtype=float)).astype(complex)

    if kind is OperatorKind.ANNIHILATION:
        entries = b
    elif kind is OperatorKind.CREATION:
        entries = b.conj().T
    elif kind is OperatorKind.POSITION:
        entries = b + b.conj().T
    elif kind is OperatorKind.HAMILTONIAN_A:
        entries = number - kappa * (b + b.conj().T)
    elif kind is OperatorKind.HAMILTONIAN_B:
        entries = number
    else:
        raise ParameterError("'general' operators are built from explicit entries")
    return FockOperator(entries, kind)


def coherent_state(alpha: complex, n_trunc: int, leakage_tol: Optional[float] = None) -> MirrorState:
    """Truncated coherent state |α>, renormalized after truncation.

    Magnitudes are built from logs, ln|c_n| = n ln|α| − ln(n!)/2 up to a
    constant, so no coefficient underflows for large |α|. The probability
    beyond the cutoff is the Poisson tail P(n ≥ N; |α|²); TruncationError is
    raised when it exceeds `leakage_tol` (default `settings.leakage_tol`).
    """
    tol = settings.leakage_tol if leakage_tol is None else leakage_tol
    if n_trunc < 2:
        raise ParameterError(f"n_trunc must be >= 2, got {n_trunc}")

    alpha = complex(alpha)
    leaked = float(poisson.sf(n_trunc - 1, abs(alpha) ** 2))
    if leaked > tol:
        raise TruncationError(
            f"coherent state alpha={alpha:.4g} leaks {leaked:.3e} beyond n_trunc={n_trunc} (tolerance {tol:.1e})",
            leaked=leaked,
        )
    if alpha == 0:
        return MirrorState.basis(0, n_trunc)

    n = np.arange(n_trunc)
    log_mag = n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1.0)
    amps = np.exp(log_mag - log_mag.max() + 1j * n * cmath.phase(alpha))
    amps /= np.sqrt(np.sum(np.abs(amps) ** 2))
    return MirrorState(amps)


def overlap(a: MirrorState, b: MirrorState) -> complex:
    """<a|b>."""
    if a.n_trunc != b.n_trunc:
        raise ParameterError(f"dimension mismatch: {a.n_trunc} vs {b.n_trunc}")
    return complex(np.vdot(a.amps, b.amps))
