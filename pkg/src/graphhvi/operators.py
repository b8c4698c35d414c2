"""Sparse assembly of the graph operator, its constants, and the inner solver.

The operator acts pointwise as
``(L phi)(v) = (1/mu(v)) sum_w gamma(v,w) (phi(v) - phi(w)) + (kappa(v)/mu(v)) phi(v)``;
algebraically ``M^-1 (K + C) phi`` with K the conductance stiffness matrix,
C = diag(kappa) and M = diag(mu).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .calculus import _check_nodes, difference, lp_norm_edges, lp_norm_nodes
from .graphs import WeightedGraph


class LinearSolveError(RuntimeError):
    """Inner linear solve failed to reach its residual contract."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class AssembledOperator:
    graph: WeightedGraph
    stiffness: sparse.csr_matrix   # K, symmetric PSD, zero row sums
    kappa: np.ndarray              # diagonal of C
    mu: np.ndarray                 # diagonal of M


@dataclass(frozen=True)
class OperatorConstants:
    """Data-derived ratio extrema; on edgeless graphs the gamma/rho extrema
    are vacuous and reported as (inf, 0)."""

    m_gamma_lo: float
    m_gamma_hi: float
    m_kappa_lo: float
    m_kappa_hi: float
    m_coercive: float
    m_bounded: float


def assemble(g: WeightedGraph) -> AssembledOperator:
    """Sparse K, C, M in canonical node order."""
    n = g.num_nodes
    if g.num_edges:
        rows = np.concatenate([g.edge_src, g.edge_src])
        cols = np.concatenate([g.edge_src, g.edge_dst])
        vals = np.concatenate([g.gamma, -g.gamma])
        K = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    else:
        K = sparse.csr_matrix((n, n))
    return AssembledOperator(graph=g, stiffness=K, kappa=g.kappa, mu=g.mu)


def apply(opr: AssembledOperator, phi: np.ndarray) -> np.ndarray:
    """Pointwise operator value ``M^-1 (K + C) phi``."""
    phi = _check_nodes(opr.graph, phi)
    return (opr.stiffness @ phi + opr.kappa * phi) / opr.mu


def bilinear_form(opr: AssembledOperator, phi: np.ndarray,
                  psi: np.ndarray) -> float:
    """Summation-by-parts form, evaluated directly from the edge sums:
    ``1/2 sum_e gamma (dphi)(dpsi) + sum_v kappa phi psi``."""
    g = opr.graph
    dphi = difference(g, phi)
    dpsi = difference(g, psi)
    return float(0.5 * np.sum(g.gamma * dphi * dpsi)
                 + np.sum(g.kappa * phi * psi))


def constants(g: WeightedGraph) -> OperatorConstants:
    if g.num_edges:
        ratios = g.gamma / g.rho
        g_lo, g_hi = float(ratios.min()), float(ratios.max())
    else:
        g_lo, g_hi = math.inf, 0.0
    kr = g.kappa / g.mu
    k_lo, k_hi = float(kr.min()), float(kr.max())
    return OperatorConstants(
        m_gamma_lo=g_lo, m_gamma_hi=g_hi,
        m_kappa_lo=k_lo, m_kappa_hi=k_hi,
        m_coercive=min(g_lo, k_lo),
        m_bounded=max(g_hi, k_hi),
    )


def _pcg(matvec, diag: np.ndarray, rhs: np.ndarray, x0: np.ndarray | None,
         tol: float, max_iter: int) -> tuple[np.ndarray, float, int]:
    """Diagonally preconditioned conjugate gradients.

    Stops when the unpreconditioned residual satisfies
    ``||A x - rhs|| <= tol * ||rhs||``.  Deterministic for fixed inputs.
    """
    nb = float(np.linalg.norm(rhs))
    if nb == 0.0:
        return np.zeros_like(rhs), 0.0, 0
    x = np.zeros_like(rhs) if x0 is None else x0.astype(float, copy=True)
    r = rhs - matvec(x)
    inv_d = 1.0 / diag
    z = inv_d * r
    p = z.copy()
    rz = float(r @ z)
    nr = float(np.linalg.norm(r))
    it = 0
    while nr > tol * nb and it < max_iter:
        Ap = matvec(p)
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        nr = float(np.linalg.norm(r))
        if nr <= tol * nb:
            it += 1
            break
        z = inv_d * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, nr / nb, it


def solve_spd(opr: AssembledOperator, shift: np.ndarray, rhs: np.ndarray,
              tol: float = 1e-12, max_iter: int = 10000,
              x0: np.ndarray | None = None) -> np.ndarray:
    """Solve ``(K + C + diag(shift)) phi = rhs`` by preconditioned CG.

    ``shift`` entries must be nonnegative.  Raises :class:`LinearSolveError`
    when the relative-residual contract cannot be met within ``max_iter``.
    """
    shift = np.asarray(shift, dtype=float)
    if shift.shape != opr.kappa.shape:
        raise ValueError("shift diagonal has wrong shape")
    if np.any(shift < 0):
        raise ValueError("shift diagonal must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rhs = _check_nodes(opr.graph, rhs)
    diag = opr.kappa + shift
    K = opr.stiffness
    x, rel, _ = _pcg(lambda v: K @ v + diag * v,
                     K.diagonal() + diag, rhs, x0, tol, max_iter)
    if rel > tol:
        raise LinearSolveError(
            f"PCG did not converge: relative residual {rel:.3e} > {tol:.3e}",
            residual=rel)
    return x


def coercivity_gap(opr: AssembledOperator, phi: np.ndarray,
                   m_coercive: float) -> float:
    """``<L phi, phi>_mu - m_coercive (1/2 ||dphi||^2 + ||phi||^2)``;
    nonnegative (up to rounding) by the data-derived coercivity bound."""
    g = opr.graph
    lhs = bilinear_form(opr, phi, phi)
    rhs = m_coercive * (0.5 * lp_norm_edges(g, difference(g, phi)) ** 2
                        + lp_norm_nodes(g, phi) ** 2)
    return lhs - rhs
