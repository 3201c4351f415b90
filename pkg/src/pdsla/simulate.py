"""Monte Carlo data generating processes.

Both designs are VAR(1) models in first differences,
``dz_t = A dz_{t-1} + u_t`` with ``u_t ~ N(0, Sigma)`` and
``Sigma_ij = rho^|i-j|``, integrated once to produce I(1) levels.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from pdsla.errors import ExplosiveDgp, UsageError
from pdsla.panel import Panel


@dataclass(frozen=True)
class DgpSpec:
    """One simulation design.

    ``power_coef`` sets entry (2, 1) of ``A`` (variable 1 driving variable 2).
    ``None`` keeps the base matrix, which for DGP2 has a nonzero (2, 1) entry.
    """

    kind: int
    K: int
    T: int
    rho: float = 0.0
    a: float = 0.3
    power_coef: Optional[float] = None
    burn_in: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (1, 2):
            raise UsageError(f"DGP kind must be 1 or 2, got {self.kind}")
        if self.K < 2:
            raise UsageError("K must be at least 2")
        if self.T < 1 or self.burn_in < 0:
            raise UsageError("T must be positive and burn_in non-negative")
        if not -1.0 < self.rho < 1.0:
            raise UsageError("rho must lie in (-1, 1)")

    @classmethod
    def size_design(cls, kind: int, K: int, T: int, rho: float = 0.0, **kw) -> "DgpSpec":
        """Null of no causality from variable 1 to 2 (DGP2 needs its (2, 1) entry zeroed)."""
        return cls(kind, K, T, rho, power_coef=None if kind == 1 else 0.0, **kw)

    @classmethod
    def power_design(cls, kind: int, K: int, T: int, rho: float = 0.0, coef: float = 0.2, **kw) -> "DgpSpec":
        return cls(kind, K, T, rho, power_coef=coef, **kw)

    def key(self) -> str:
        """Stable identifier of the design, seed excluded."""
        return f"dgp{self.kind}|K{self.K}|T{self.T}|rho{self.rho!r}|a{self.a!r}|pc{self.power_coef!r}|b{self.burn_in}"

    def with_seed(self, seed: int) -> "DgpSpec":
        return replace(self, seed=seed)


def toeplitz_sigma(K: int, rho: float) -> np.ndarray:
    if not -1.0 < rho < 1.0:
        raise UsageError("rho must lie in (-1, 1)")
    idx = np.arange(K)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def dgp_coefficients(spec: DgpSpec) -> np.ndarray:
    K = spec.K
    if spec.kind == 1:
        A = 0.5 * np.eye(K)
    else:
        idx = np.arange(K)
        dist = np.abs(idx[:, None] - idx[None, :])
        A = (-1.0) ** dist * spec.a ** (dist + 1)
    if spec.power_coef is not None:
        A[1, 0] = spec.power_coef
    return A


def spectral_radius(A: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def make_rng(*key) -> np.random.Generator:
    """PCG64 generator seeded from integers and strings (strings go through CRC32)."""
    entropy = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def simulate_differences(spec: DgpSpec, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Retained ``T x K`` draws of ``dz_t`` after the burn-in."""
    A = dgp_coefficients(spec)
    if spectral_radius(A) >= 1.0:
        raise ExplosiveDgp(f"difference VAR has spectral radius {spectral_radius(A):.4f} >= 1")
    rng = rng if rng is not None else make_rng(spec.seed)
    L = np.linalg.cholesky(toeplitz_sigma(spec.K, spec.rho))
    n = spec.burn_in + spec.T
    u = rng.standard_normal((n, spec.K)) @ L.T
    dz = np.empty((n, spec.K))
    prev = np.zeros(spec.K)
    for t in range(n):
        prev = A @ prev + u[t]
        dz[t] = prev
    return dz[spec.burn_in :]


def simulate_levels(spec: DgpSpec, rng: Optional[np.random.Generator] = None) -> Panel:
    """I(1) levels starting from ``z_0 = 0``; variables are named ``z1 .. zK``."""
    dz = simulate_differences(spec, rng)
    return Panel(np.cumsum(dz, axis=0), [f"z{i + 1}" for i in range(spec.K)])


def macro_fixture(seed: int, K: int = 20, T: int = 240, rho: float = 0.3, target: str = "UNCERT") -> Panel:
    """Synthetic monthly "macro-like" panel with no Granger causal links at all.

    Every series follows its own AR(1) in differences (coefficients between
    0.1 and 0.6) driven by Toeplitz-correlated shocks; roughly a third are
    left stationary, the rest are integrated once, and a few get a positive
    level so log transforms apply. Column ``target`` plays the uncertainty
    index. Contemporaneous correlation does not create Granger causality, so
    every directed edge is a true null.
    """
    rng = make_rng(seed, "macro-fixture")
    phi = rng.uniform(0.1, 0.6, size=K)
    L = np.linalg.cholesky(toeplitz_sigma(K, rho))
    burn = 50
    u = rng.standard_normal((burn + T, K)) @ L.T
    dz = np.empty_like(u)
    prev = np.zeros(K)
    for t in range(burn + T):
        prev = phi * prev + u[t]
        dz[t] = prev
    dz = dz[burn:]
    integrated = rng.random(K) < 2.0 / 3.0
    values = np.where(integrated, np.cumsum(dz, axis=0), dz)
    scale = rng.uniform(0.5, 5.0, size=K)
    values = values * scale
    positive = np.zeros(K, dtype=bool)
    positive[: K // 4] = True
    values[:, positive] = 100.0 + values[:, positive] - values[:, positive].min(axis=0) + 1.0
    names = [target] + [f"M{i:02d}" for i in range(1, K)]
    months = [f"{1990 + (t // 12)}-{t % 12 + 1:02d}-01" for t in range(T)]
    tcodes = [2 if integrated[i] and not positive[i] else (5 if positive[i] else 1) for i in range(K)]
    return Panel(values, names, months, tcodes)
