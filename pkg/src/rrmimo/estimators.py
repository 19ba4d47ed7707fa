"""Pilot-aided channel estimators.

Everything starts from the pilot matched-filter output ``Y p``; the
reduced-rank estimators project it onto a truncated basis, optionally
after removing the linear phase of the mean AoA.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .bases import TruncatedBasis
from .channel import (ArrayGeometry, PilotBlock, SpatialCorrelation, correlation_matrix,
                      steering_vector)
from .errors import DomainError
from .spectrum import DominantSupport, lpm


@dataclass(frozen=True, eq=False)
class MatchedFilterOutput:
    yp: np.ndarray
    gamma: float
    pilot_energy: float


@dataclass(frozen=True, eq=False)
class EstimationReport:
    h_hat: np.ndarray
    phi_hat: float | None = None
    support_used: DominantSupport | None = None     # None means the full space
    sq_error: float | None = None

    def with_truth(self, h) -> "EstimationReport":
        h = getattr(h, "h", h)
        return replace(self, sq_error=float(np.sum(np.abs(self.h_hat - h) ** 2)))


def _pilot_vec(pilot) -> np.ndarray:
    return pilot.pilot if isinstance(pilot, PilotBlock) else np.asarray(pilot, dtype=complex)


def _report(h_hat, h_true, **kw) -> EstimationReport:
    rep = EstimationReport(h_hat, **kw)
    return rep if h_true is None else rep.with_truth(h_true)


def matched_filter(Y: np.ndarray, pilot, beta: float) -> MatchedFilterOutput:
    """``Y p`` and ``gamma = sqrt(beta) ||p||^2`` (``beta`` may be an estimate)."""
    if not beta > 0:
        raise DomainError("beta must be positive")
    p = _pilot_vec(pilot)
    Y = np.asarray(Y)
    if Y.shape[-1] != p.size:
        raise DomainError("pilot length does not match the received block")
    energy = float(np.vdot(p, p).real)
    return MatchedFilterOutput(Y @ p, float(np.sqrt(beta) * energy), energy)


def estimate_beta(yp: np.ndarray, pilot_energy: float, floor: float = 1e-12) -> float:
    """Moment estimate ``(||Yp||^2 - M ||p||^2) / (M ||p||^4)``, floored to stay positive.

    The ``1/M`` undoes ``E||h||^2 = M`` of the normalized channel.
    """
    M = yp.shape[0]
    est = (np.vdot(yp, yp).real - M * pilot_energy) / (M * pilot_energy ** 2)
    return float(max(est, floor))


def estimate_ls(mf: MatchedFilterOutput, h_true=None) -> EstimationReport:
    return _report(mf.yp / mf.gamma, h_true)


def estimate_rr_regular(mf: MatchedFilterOutput, trunc: TruncatedBasis, h_true=None) -> EstimationReport:
    """Projection of the LS estimate onto the span of the retained columns."""
    sup = DominantSupport.from_indices(trunc.support)
    if trunc.m == 0:
        return _report(np.zeros_like(mf.yp), h_true, support_used=sup)
    qm = trunc.q_m
    h_hat = qm @ (qm.conj().T @ mf.yp) / mf.gamma
    return _report(h_hat, h_true, support_used=sup)


def aoa_grid(grid_deg: float = 0.5) -> np.ndarray:
    n = int(round(180.0 / grid_deg))
    if not np.isclose(n * grid_deg, 180.0):
        raise DomainError("grid spacing must divide 180 degrees")
    return np.radians(np.linspace(-90.0, 90.0, n + 1))


def line_search(values: np.ndarray, grid: np.ndarray,
                objective: Callable[[float], float] | None = None) -> float:
    """Maximizer of sampled ``values`` with one parabolic refinement step.

    Exact ties prefer the smaller ``|phi|``.  The refined point is kept only
    if ``objective`` (when given) does not drop below the best grid value.
    """
    top = np.max(values)
    ties = np.flatnonzero(values == top)
    k = int(ties[np.argmin(np.abs(grid[ties]))])
    phi = float(grid[k])
    if 0 < k < grid.size - 1:
        f0, fm, fp = values[k], values[k - 1], values[k + 1]
        curv = fm - 2 * f0 + fp
        if curv < 0:
            step = grid[k + 1] - grid[k]
            cand = float(np.clip(phi + 0.5 * step * (fm - fp) / curv, grid[k - 1], grid[k + 1]))
            if objective is None or objective(cand) >= f0:
                phi = cand
    return phi


def _aoa_objective_vec(yp: np.ndarray, qm: np.ndarray, geom: ArrayGeometry, phis) -> np.ndarray:
    """``||Q_m^H W^H(phi) y||^2`` for each angle in ``phis``."""
    Wg = steering_vector(geom, np.atleast_1d(phis))            # (M, G)
    Z = qm.conj().T @ (Wg.conj() * yp[:, None])                 # (m, G)
    return np.sum(np.abs(Z) ** 2, axis=0)


def search_mean_aoa(mf: MatchedFilterOutput, trunc: TruncatedBasis, grid_deg: float = 0.5,
                    geom: ArrayGeometry | None = None) -> float:
    """Mean AoA maximizing the in-subspace energy of the phase-aligned observation."""
    if trunc.m < 1:
        raise DomainError("AoA search needs at least one basis column")
    geom = geom or ArrayGeometry(mf.yp.size)
    qm = trunc.q_m
    grid = aoa_grid(grid_deg)
    vals = _aoa_objective_vec(mf.yp, qm, geom, grid)
    return line_search(vals, grid, lambda t: float(_aoa_objective_vec(mf.yp, qm, geom, t)[0]))


def aoa_objective(mf: MatchedFilterOutput, trunc: TruncatedBasis, phi: float,
                  geom: ArrayGeometry | None = None) -> float:
    geom = geom or ArrayGeometry(mf.yp.size)
    return float(_aoa_objective_vec(mf.yp, trunc.q_m, geom, phi)[0])


def estimate_rr_lpm(mf: MatchedFilterOutput, trunc: TruncatedBasis, grid_deg: float = 0.5,
                    geom: ArrayGeometry | None = None, phi: float | None = None,
                    h_true=None) -> EstimationReport:
    """LPM-aided reduced-rank estimate ``W(phi) Q_m Q_m^H W^H(phi) Yp / gamma``.

    The mean AoA is found by :func:`search_mean_aoa` unless ``phi`` is given
    (known-AoA mode; ``phi=0`` reduces to the regular estimator).
    """
    geom = geom or ArrayGeometry(mf.yp.size)
    sup = DominantSupport.from_indices(trunc.support)
    if trunc.m == 0:
        return _report(np.zeros_like(mf.yp), h_true, phi_hat=phi, support_used=sup)
    if phi is None:
        phi = search_mean_aoa(mf, trunc, grid_deg, geom)
    W = lpm(geom, phi)
    qm = trunc.q_m
    h_hat = W.apply(qm @ (qm.conj().T @ W.apply_h(mf.yp))) / mf.gamma
    return _report(h_hat, h_true, phi_hat=phi, support_used=sup)


def estimate_mmse(Y: np.ndarray, pilot, corr, beta: float = 1.0, h_true=None) -> EstimationReport:
    """Linear MMSE estimate ``sqrt(beta) Phi (beta ||p||^2 Phi + I)^-1 Y p``.

    With ``beta=1`` this is the textbook ``Phi (||p||^2 Phi + I)^-1 (p^T kron I) vec(Y)``.
    The system is solved through a Hermitian factorization, never inverted.
    """
    P = correlation_matrix(corr)
    p = _pilot_vec(pilot)
    energy = float(np.vdot(p, p).real)
    yp = np.asarray(Y) @ p
    A = beta * energy * P + np.eye(P.shape[0])
    A = 0.5 * (A + A.conj().T)
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            x = scipy.linalg.solve(A, yp, assume_a="her")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            raise DomainError(
                f"MMSE system is singular ({exc}); project the correlation onto the PSD cone"
            ) from exc
    return _report(np.sqrt(beta) * (P @ x), h_true)


def sample_psi(blocks: Sequence[tuple[np.ndarray, object]]) -> np.ndarray:
    """``(1/J) sum_i (Y_i p_i)(Y_i p_i)^H`` over J pilot periods."""
    if len(blocks) < 1:
        raise DomainError("need at least one pilot block")
    ys = np.stack([np.asarray(Y) @ _pilot_vec(p) for Y, p in blocks], axis=1)   # (M, J)
    return ys @ ys.conj().T / ys.shape[1]


def estimate_correlation(blocks: Sequence[tuple[np.ndarray, object]], gamma: float) -> SpatialCorrelation:
    """``(Psi_hat - ||p||^2 I) / gamma^2`` from J received pilot blocks."""
    energies = {round(float(np.vdot(_pilot_vec(p), _pilot_vec(p)).real), 9) for _, p in blocks}
    if len(energies) != 1:
        raise DomainError("pilots must have equal energy across blocks")
    energy = energies.pop()
    psi = sample_psi(blocks)
    phi = (psi - energy * np.eye(psi.shape[0])) / gamma ** 2
    phi = 0.5 * (phi + phi.conj().T)
    return SpatialCorrelation(phi, "pilot-estimated", num_blocks=len(blocks),
                              meta={"psi_rank": int(np.linalg.matrix_rank(psi, hermitian=True))})
