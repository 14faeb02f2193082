"""
Affine power-reference and trading policies.

A policy maps interval-averaged activation w̃ (length N_S) to the N_S + 1
breakpoints of a piecewise-affine power reference: p = Q w̃ + q. Row k of Q
(k = 0..N_S) belongs to breakpoint p_k; column n (1-based) to w̃_n.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from src.core.errors import PolicyError
from src.models.timegrid import TimeGrid


@dataclass(frozen=True)
class PolicyStructure:
    """Structural zeros of Q: causality, control delay and band."""
    n: int
    bandwidth: int
    delay_steps: int = 0
    time_invariant_gamma: bool = True
    symmetric_gamma: bool = True

    def allowed(self, k: int, n: int) -> bool:
        """Whether Q may be nonzero at breakpoint k (0-based) and activation column n (1-based)."""
        m = k + 1
        return 1 <= n <= self.n and 0 <= k <= self.n and n <= m - 2 - self.delay_steps and m <= n + self.bandwidth + 2

    def columns(self, k: int) -> range:
        """Allowed 1-based columns n of breakpoint row k, in increasing order."""
        m = k + 1
        lo = max(1, m - self.bandwidth - 2)
        hi = min(self.n, m - 2 - self.delay_steps)
        return range(lo, hi + 1) if hi >= lo else range(0)

    def last_row(self, n: int) -> Optional[int]:
        """Largest breakpoint k whose row may depend on w̃_n, or None if column n is fully masked."""
        k_hi = min(self.n, n + self.bandwidth + 1)
        k_lo = n + 1 + self.delay_steps
        return k_hi if k_hi >= k_lo else None

    @cached_property
    def mask(self) -> np.ndarray:
        """Boolean (N_S+1) x N_S allowed-entry matrix."""
        out = np.zeros((self.n + 1, self.n), dtype=bool)
        for k in range(self.n + 1):
            for n in self.columns(k):
                out[k, n - 1] = True
        return out

    def entries(self) -> list[tuple[int, int]]:
        """All allowed (k, n) pairs in row-major order."""
        return [(k, n) for k in range(self.n + 1) for n in self.columns(k)]


def make_structure(grid: TimeGrid, bandwidth: int, delay: float = 0.0, time_invariant: bool = True) -> PolicyStructure:
    if bandwidth < 0:
        raise PolicyError(f"Bandwidth must be >= 0, got {bandwidth}")
    if delay < 0:
        raise PolicyError(f"Delay must be >= 0, got {delay}")
    return PolicyStructure(
        n=grid.N_S,
        bandwidth=int(bandwidth),
        delay_steps=int(math.ceil(delay / grid.T_S)),
        time_invariant_gamma=time_invariant,
    )


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    """Decision triple {Q, q, γ}; γ is None for market trading policies."""
    Q: np.ndarray
    q: np.ndarray
    gamma: Optional[np.ndarray] = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] + 1:
            raise PolicyError(f"Q must be (N_S+1) x N_S, got shape {Q.shape}")
        if q.shape != (Q.shape[0],):
            raise PolicyError(f"q must have length {Q.shape[0]}, got shape {q.shape}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        if self.gamma is not None:
            gamma = np.asarray(self.gamma, dtype=float)
            if gamma.shape != (Q.shape[1],):
                raise PolicyError(f"gamma must have length {Q.shape[1]}, got shape {gamma.shape}")
            object.__setattr__(self, "gamma", gamma)

    @property
    def n(self) -> int:
        return self.Q.shape[1]

    def breakpoints(self, w_avg: Sequence[float]) -> np.ndarray:
        """p = Q w̃ + q."""
        w_avg = np.asarray(w_avg, dtype=float)
        if w_avg.shape != (self.n,):
            raise PolicyError(f"Averaged activation must have length {self.n}, got shape {w_avg.shape}")
        return self.Q @ w_avg + self.q

    def gamma_or_zero(self) -> np.ndarray:
        return self.gamma if self.gamma is not None else np.zeros(self.n)


def zero_policy(n: int, with_gamma: bool = True) -> AffinePolicy:
    return AffinePolicy(
        Q=np.zeros((n + 1, n)),
        q=np.zeros(n + 1),
        gamma=np.zeros(n) if with_gamma else None,
    )


def aggregate(policies: Sequence[AffinePolicy]) -> AffinePolicy:
    """Elementwise sum of Q, q and γ."""
    if not policies:
        raise PolicyError("Cannot aggregate an empty list of policies")
    shape = policies[0].Q.shape
    for policy in policies[1:]:
        if policy.Q.shape != shape:
            raise PolicyError(f"Policy dimension mismatch: {policy.Q.shape} vs {shape}")
    gammas = [p.gamma for p in policies if p.gamma is not None]
    return AffinePolicy(
        Q=sum((p.Q for p in policies), np.zeros(shape)),
        q=sum((p.q for p in policies), np.zeros(shape[0])),
        gamma=sum(gammas, np.zeros(shape[1])) if gammas else None,
    )


@dataclass(frozen=True)
class PolicyViolation:
    kind: str  # "mask", "gamma_negative", "gamma_time_variant", "dimension"
    index: tuple[int, ...]
    value: float

    def __str__(self) -> str:
        return f"{self.kind} at {self.index}: {self.value:.6g}"


def validate(policy: AffinePolicy, structure: PolicyStructure, tol: float = 0.0) -> list[PolicyViolation]:
    """List every entry breaking the structure or the γ invariants; empty when compliant.

    Indices in the report are 1-based (m, n) for Q and 1-based k for γ.
    """
    report: list[PolicyViolation] = []
    if policy.Q.shape != (structure.n + 1, structure.n):
        return [PolicyViolation("dimension", policy.Q.shape, float("nan"))]
    offending = np.argwhere((np.abs(policy.Q) > tol) & ~structure.mask)
    for k, col in offending:
        report.append(PolicyViolation("mask", (int(k) + 1, int(col) + 1), float(policy.Q[k, col])))
    if policy.gamma is not None:
        for k in np.flatnonzero(policy.gamma < -tol):
            report.append(PolicyViolation("gamma_negative", (int(k) + 1,), float(policy.gamma[k])))
        if structure.time_invariant_gamma and policy.gamma.size:
            spread = float(policy.gamma.max() - policy.gamma.min())
            if spread > max(tol, 1e-9 * max(1.0, float(np.abs(policy.gamma).max()))):
                report.append(PolicyViolation("gamma_time_variant", (), spread))
    return report
