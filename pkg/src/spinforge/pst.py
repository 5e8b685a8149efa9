"""Perfect-state-transfer coupling sets.

The engineered couplings J_k = sqrt(k(n-k)) give a single-excitation chain
whose evolution at t0 = pi/2 maps site k to the mirror site n+1-k exactly,
up to the global phase (-i)^(n-1). These chains seed every other design
routine in the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import Spectrum, SymTridiag, propagator


@dataclass(frozen=True)
class PstChain:
    """Mirror-transfer chain: n-1 positive couplings and the transfer time."""

    couplings: np.ndarray
    transfer_time: float

    def __post_init__(self):
        couplings = np.asarray(self.couplings, dtype=float)
        object.__setattr__(self, "couplings", couplings)
        if couplings.size < 1:
            raise ValueError("a chain needs at least two sites")
        if not np.all(couplings > 0):
            raise ValueError("couplings must be strictly positive")

    @property
    def n(self) -> int:
        return self.couplings.size + 1

    def single_particle(self) -> SymTridiag:
        """The chain's single-excitation Hamiltonian (zero on-site terms)."""
        return SymTridiag(np.zeros(self.n), self.couplings)


def standard_couplings(n: int) -> PstChain:
    """The engineered mirror-transfer solution on n sites.

    Couplings are J_k = sqrt(k(n-k)) for k = 1..n-1, transfer time pi/2.
    The resulting single-excitation spectrum is the uniformly spaced ladder
    {-(n-1), -(n-3), ..., n-1}.
    """
    if n < 2:
        raise ValueError("need n >= 2 sites")
    k = np.arange(1, n)
    return PstChain(np.sqrt(k * (n - k)), np.pi / 2)


def verify_mirror(chain: PstChain) -> float:
    """Worst-case deviation of the chain's evolution from exact mirror transfer.

    Evaluates e^{-iht0} and compares every matrix element <n+1-k|U|k> with the
    expected uniform phase (-i)^(n-1). Diagnostic only; small for engineered
    chains, order one for generic ones.
    """
    n = chain.n
    u = propagator(chain.single_particle().to_dense(), chain.transfer_time).u
    phase = (-1j) ** (n - 1)
    transfer = u[::-1, :].diagonal()
    return float(np.abs(transfer - phase).max())


def min_gap_bound(s: Spectrum) -> float:
    """Minimum evolution time compatible with a spectrum, pi over its smallest gap.

    Consecutive eigenvalues closer than 1e-12 (relative) are treated as
    degenerate and skipped; a fully degenerate spectrum has no finite bound.
    """
    values = s.values
    if values.size < 2:
        raise ValueError("need at least two eigenvalues")
    diffs = np.diff(values)
    tol = 1e-12 * max(1.0, np.abs(values).max())
    gaps = diffs[diffs > tol]
    if gaps.size == 0:
        raise ValueError("spectrum is fully degenerate; no finite time bound")
    return float(np.pi / gaps.min())
