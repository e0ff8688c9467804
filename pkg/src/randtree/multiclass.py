"""Multiclass analytics: ergodicity fixed point, Perron-Frobenius checks,
mean lifetimes/volumes, per-class height law and the numeric pgf.

Classes are indexed 0..C-1.  The per-pair intensity matrix rho[c, c'] =
lambda[c, c'] / mu[c, c'] drives everything: the chain is ergodic exactly
when y_c = sum_d rho[c, d] exp(y_d) has a real solution, found (when it
exists) as the limit of the monotone iteration from zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DomainError,
    InconsistencyError,
    InfeasibleError,
    NoConvergence,
)
from .model_core import INV_E

#: PF eigenvalue within this of 1/e makes the verdict numerically unreliable.
NEAR_CRITICAL_BAND = 1e-6


@dataclass(frozen=True)
class RateMatrices:
    """Per-class-pair birth and death rates.

    lam[c, c'] is the rate at which a class-c vertex grows a class-c'
    edge; mu[c, c'] the death rate of a class-c' leaf whose parent has
    class c.  All mu entries must be strictly positive.
    """

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self) -> None:
        lam = np.asarray(self.lam, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)
        if lam.ndim != 2 or lam.shape[0] != lam.shape[1] or lam.shape != mu.shape:
            raise DomainError("lam and mu must be square matrices of equal shape")
        if np.any(lam < 0):
            raise DomainError("lam entries must be >= 0")
        if np.any(mu <= 0):
            raise DomainError("mu entries must be > 0")

    @property
    def n_classes(self) -> int:
        return self.lam.shape[0]

    @property
    def rho(self) -> np.ndarray:
        return self.lam / self.mu

    @classmethod
    def from_json(cls, path) -> "RateMatrices":
        with open(path) as fh:
            doc = json.load(fh)
        lam = np.asarray(doc["lambda"], dtype=float)
        mu = np.asarray(doc["mu"], dtype=float)
        n = len(doc.get("classes", range(lam.shape[0])))
        if lam.shape != (n, n):
            raise DomainError(f"lambda shape {lam.shape} does not match {n} classes")
        return cls(lam=lam, mu=mu)

    def to_json_dict(self) -> dict:
        return {
            "classes": list(range(self.n_classes)),
            "lambda": self.lam.tolist(),
            "mu": self.mu.tolist(),
        }


@dataclass
class MulticlassSolution:
    ergodic: bool
    r_c: Optional[np.ndarray]
    m: Optional[np.ndarray]
    pf_rho: float
    rho_c: np.ndarray
    inconclusive: bool = False


def pf_eigenvalue(matrix: np.ndarray, tol: float = 1e-12, max_iter: int = 100000) -> float:
    """Perron-Frobenius eigenvalue of a nonnegative square matrix.

    Power iteration with normalization; restarts from every basis vector
    so that reducible matrices report the max over diagonal blocks.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("matrix must be square")
    if np.any(a < 0):
        raise DomainError("matrix must be nonnegative")
    n = a.shape[0]
    best = 0.0
    # iterate on a + I: same Perron vector, eigenvalue shifted by 1, and
    # the shift breaks the cycling of periodic (e.g. permutation-like) blocks
    shifted = a + np.eye(n)
    starts = [np.ones(n)] + [np.eye(n)[i] for i in range(n)]
    for x in starts:
        lam_prev = -1.0
        converged = False
        for _ in range(max_iter):
            y = shifted @ x
            norm = np.abs(y).sum()
            if norm == 0:
                lam_prev = 0.0
                converged = True
                break
            lam = norm / np.abs(x).sum()
            x = y / norm
            if abs(lam - lam_prev) <= tol * max(1.0, lam):
                lam_prev = lam
                converged = True
                break
            lam_prev = lam
        if not converged:
            # defective spectra (nilpotent blocks) stall the iteration at an
            # algebraic rate; fall back to the dense spectrum
            return float(np.abs(np.linalg.eigvals(a)).max())
        best = max(best, lam_prev - 1.0)
    return max(best, 0.0)


def solve_rc(
    rho_matrix: np.ndarray, k_max: int = 1000000, tol: float = 1e-12
) -> Optional[np.ndarray]:
    """Smallest solution of y_c = sum_d rho[c,d] exp(y_d), or None if divergent.

    The iteration r_{k+1} = rho exp(r_k) from zero is componentwise
    nondecreasing and bounded by every true solution, so unbounded growth
    is conclusive.  Divergence is declared once any component has exceeded
    an a-priori growth bound on 3 consecutive checks.
    """
    rho = np.asarray(rho_matrix, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError("rho_matrix must be square")
    if np.any(rho < 0):
        raise DomainError("rho_matrix must be nonnegative")
    rho_c = rho.sum(axis=1)
    bound = rho_c.max() * math.e + 1.0
    r = np.zeros(rho.shape[0])
    strikes = 0
    for _ in range(k_max):
        r_next = rho @ np.exp(r)
        if r_next.max() > bound:
            strikes += 1
            if strikes >= 3:
                return None
        else:
            strikes = 0
        if r_next.max() > 700.0:
            return None  # exp would overflow; certainly divergent
        if np.abs(r_next - r).max() <= tol:
            return r_next
        r = r_next
    return None


def classify_multiclass(rates: RateMatrices, tol: float = 1e-9) -> MulticlassSolution:
    """Run the fixed point, cross-check the PF conditions, attach lifetimes."""
    rho = rates.rho
    rho_c = rho.sum(axis=1)
    pf = pf_eigenvalue(rho)
    r_c = solve_rc(rho)
    ergodic = r_c is not None
    inconclusive = abs(pf - INV_E) <= NEAR_CRITICAL_BAND
    if not inconclusive:
        if ergodic and pf > INV_E + tol:
            raise InconsistencyError(
                f"fixed point converged but PF eigenvalue {pf} > 1/e: numeric fault"
            )
        if np.all(rho_c <= INV_E + 1e-15) and not ergodic:
            raise InconsistencyError(
                "sufficient condition holds (all rho_c <= 1/e) but iteration diverged"
            )
        if ergodic and np.all(rho_c <= INV_E + 1e-15):
            if np.any(r_c > rho_c * math.e + tol):
                raise InconsistencyError("r_c exceeds the guaranteed bound rho_c * e")
    m = np.exp(r_c)[None, :] / rates.mu if ergodic else None
    return MulticlassSolution(
        ergodic=ergodic,
        r_c=r_c,
        m=m,
        pf_rho=pf,
        rho_c=rho_c,
        inconclusive=inconclusive,
    )


def mean_volume_matrix(rho_matrix: np.ndarray, r_c: np.ndarray) -> np.ndarray:
    """E N[c, d]: mean stationary count of class-d vertices under a class-c root.

    Solves (I - M) EN = I with M = rho[c, c'] exp(r_{c'}), after verifying
    PF(M) < 1; otherwise the means are infinite.
    """
    rho = np.asarray(rho_matrix, dtype=float)
    r_c = np.asarray(r_c, dtype=float)
    m_mat = rho * np.exp(r_c)[None, :]
    pf = pf_eigenvalue(m_mat)
    if pf >= 1.0:
        raise InfeasibleError(f"PF(M) = {pf} >= 1: mean volumes are infinite")
    en = np.linalg.solve(np.eye(rho.shape[0]) - m_mat, np.eye(rho.shape[0]))
    if np.any(en < -1e-12):
        raise InfeasibleError("negative entries in the mean-volume solution")
    return np.maximum(en, 0.0)


def multiclass_height_tail(
    rho_matrix: np.ndarray, r_c: np.ndarray, h_max: int
) -> np.ndarray:
    """tails[c, h] = P{H_c > h - 1}, seeded tails[c, 1] = 1 - exp(-r_c).

    Vector recursion P{H_c > h+1} = 1 - exp(-sum_d rho[c,d] e^{r_d} P{H_d > h}).
    """
    rho = np.asarray(rho_matrix, dtype=float)
    r_c = np.asarray(r_c, dtype=float)
    if h_max < 1:
        raise DomainError(f"h_max must be >= 1, got {h_max}")
    weights = rho * np.exp(r_c)[None, :]
    n = rho.shape[0]
    tails = np.empty((n, h_max + 1))
    tails[:, 0] = 1.0
    tails[:, 1] = -np.expm1(-r_c)
    for h in range(1, h_max):
        tails[:, h + 1] = -np.expm1(-(weights @ tails[:, h]))
    return tails


def volume_pgf_fixed_point(
    rho_matrix: np.ndarray,
    r_c: np.ndarray,
    z: np.ndarray,
    tol: float = 1e-12,
    k_max: int = 1000000,
) -> np.ndarray:
    """Smallest fixed point of phi_c = z_c exp(sum_d w[c,d] (phi_d - 1)).

    w[c, d] = lambda m = rho[c, d] exp(r_d); monotone iteration from
    phi = z climbs to the smallest solution.  phi(1, ..., 1) = 1.
    """
    rho = np.asarray(rho_matrix, dtype=float)
    r_c = np.asarray(r_c, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0) or np.any(z > 1):
        raise DomainError("z components must lie in (0, 1]")
    weights = rho * np.exp(r_c)[None, :]
    phi = z.copy()
    for _ in range(k_max):
        phi_next = z * np.exp(weights @ (phi - 1.0))
        if np.abs(phi_next - phi).max() <= tol:
            return phi_next
        phi = phi_next
    raise NoConvergence(f"pgf fixed point not converged after {k_max} sweeps")
