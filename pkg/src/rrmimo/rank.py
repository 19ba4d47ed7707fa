"""Joint modeling-order / mean-AoA determination and a cheap AoA-only search."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bases import Basis
from .channel import ArrayGeometry, ClusterSpec, correlation_matrix, steering_vector
from .errors import DomainError
from .estimators import aoa_grid, line_search
from .rng import SeedLike, make_rng
from .spectrum import DominantSupport, channel_spectrum, dominant_support

HALF_PI = np.pi / 2


@dataclass(frozen=True)
class ImodResult:
    m_eta_hat: int
    phi_hat: float
    support: DominantSupport
    iterations: int
    converged: bool
    history: tuple = field(default=(), repr=False)


def correlation_aoa_objective(corr, cols: np.ndarray, geom: ArrayGeometry, phis) -> np.ndarray:
    """``tr(Q_m^H W^H(phi) Phi W(phi) Q_m)`` for each angle in ``phis``.

    Uses ``tr(P W^H Phi W) = w^H (Phi * P^T) w`` with ``P = Q_m Q_m^H``.
    """
    P = cols @ cols.conj().T
    G = correlation_matrix(corr) * P.T
    Wg = steering_vector(geom, np.atleast_1d(phis))
    return np.real(np.sum(Wg.conj() * (G @ Wg), axis=0))


def imod(basis: Basis, corr, eta: float, geom: ArrayGeometry | None = None, max_iters: int = 10,
         phi_init: float = 0.0, grid_deg: float = 0.5, aoa_support: str = "leading",
         energy_reference: str = "M") -> ImodResult:
    """Alternate between the dominant support of the aligned spectrum and the mean AoA.

    Each iteration aligns the spectrum at the current AoA, solves for the
    smallest consecutive support holding more than ``eta`` of the energy and
    re-estimates the AoA by maximizing the correlation-domain energy in
    ``m`` basis columns.  With ``aoa_support="leading"`` those are the first
    ``m`` columns, the support an aligned lowpass spectrum is steered
    toward; ``"window"`` scores the support just found instead.

    ``energy_reference="trace"`` measures ``eta`` against ``tr(Phi)``
    instead of ``M``, which suits pilot-estimated correlations.

    Stops when the AoA moves by less than half a grid step and the support
    repeats, or after ``max_iters`` iterations (``converged=False``).
    Raises :class:`InfeasibleSupportError` if an (estimated) spectrum cannot
    reach ``eta``.
    """
    if not 0 < eta < 1:
        raise DomainError("eta must lie in (0, 1)")
    if aoa_support not in ("leading", "window"):
        raise DomainError("aoa_support must be 'leading' or 'window'")
    if energy_reference not in ("M", "trace"):
        raise DomainError("energy_reference must be 'M' or 'trace'")
    P = correlation_matrix(corr)
    total = float(np.real(np.trace(P))) if energy_reference == "trace" else None
    geom = geom or ArrayGeometry(P.shape[0])
    grid = aoa_grid(grid_deg)
    tol = np.radians(grid_deg) / 2
    phi = float(phi_init)
    prev = None
    history = []
    for it in range(1, max_iters + 1):
        spec = channel_spectrum(basis, P, phi, geom)
        sup = dominant_support(spec, eta, total=total)
        if aoa_support == "leading":
            cols = basis.q[:, :sup.m]
        else:
            cols = basis.q[:, sup.indices]
        vals = correlation_aoa_objective(P, cols, geom, grid)
        new_phi = line_search(vals, grid,
                              lambda t: float(correlation_aoa_objective(P, cols, geom, t)[0]))
        history.append((sup.m, sup.windows, new_phi))
        stationary = abs(new_phi - phi) < tol
        repeated = prev is None or prev == (sup.m, sup.windows)
        phi = new_phi
        if stationary and repeated:
            return ImodResult(sup.m, phi, sup, it, True, tuple(history))
        prev = (sup.m, sup.windows)
    return ImodResult(sup.m, phi, sup, max_iters, False, tuple(history))


@dataclass(frozen=True)
class Alg2Params:
    """Settings of the low-complexity AoA search.

    ``threshold_t`` is an absolute energy; None means ``threshold_frac * M``.
    ``window_w`` None means ``ceil(M / 4)``.
    """

    step_mu_rad: float = math.radians(5.0)
    shrink_kappa: float = 2.0
    threshold_t: float | None = None
    threshold_frac: float = 0.03
    window_w: int | None = None
    max_coarse_draws: int = 2000
    min_step_rad: float = math.radians(1e-3)
    max_fine_iters: int = 100

    def __post_init__(self):
        if not self.step_mu_rad > 0:
            raise DomainError("step size must be positive")
        if not self.shrink_kappa > 1:
            raise DomainError("shrink ratio must exceed 1")


@dataclass(frozen=True)
class FastSearchResult:
    phi_hat: float
    coarse_draws: int
    objective_trace: tuple[float, ...]


def _column_energy(P: np.ndarray, cols: np.ndarray, geom: ArrayGeometry, phi: float) -> float:
    V = steering_vector(geom, phi)[:, None] * cols
    return float(np.real(np.sum(V.conj() * (P @ V))))


def aoa_search_fast(basis: Basis, corr, params: Alg2Params = Alg2Params(), seed: SeedLike = None,
                    geom: ArrayGeometry | None = None) -> FastSearchResult:
    """Random coarse draw on the DC energy, then shrinking-step descent of the tail energy.

    Relies on the aligned DCT spectrum being lowpass: near the true mean AoA
    the first column holds a large share of the energy and the last ``w``
    columns almost none.
    """
    if basis.kind != "dct2":
        raise DomainError("the fast AoA search assumes a DCT-2 basis")
    P = correlation_matrix(corr)
    M = P.shape[0]
    geom = geom or ArrayGeometry(M)
    t = params.threshold_t if params.threshold_t is not None else params.threshold_frac * M
    w = params.window_w if params.window_w is not None else math.ceil(M / 4)
    if not 1 <= w < M:
        raise DomainError("tail window must satisfy 1 <= w < M")
    rng = make_rng(seed)
    q1 = basis.q[:, :1]
    for draws in range(1, params.max_coarse_draws + 1):
        phi = float(rng.uniform(-HALF_PI, HALF_PI))
        if _column_energy(P, q1, geom, phi) >= t:
            break
    else:
        raise DomainError(
            f"coarse AoA search found no angle with DC energy >= {t:.3g} in "
            f"{params.max_coarse_draws} draws; lower the threshold"
        )
    tail = basis.q[:, M - w:]
    mu = params.step_mu_rad
    best = _column_energy(P, tail, geom, phi)
    trace = [best]
    for _ in range(params.max_fine_iters):
        if mu < params.min_step_rad:
            break
        for cand in (min(phi + mu, HALF_PI), max(-HALF_PI, phi - mu)):
            e = _column_energy(P, tail, geom, cand)
            if e < best:
                best, phi = e, cand
        trace.append(best)
        mu /= params.shrink_kappa
    return FastSearchResult(phi, draws, tuple(trace))


def asymptotic_rank(geom: ArrayGeometry, cluster: ClusterSpec) -> float:
    """Large-array normalized rank ``min(1, (xi/lambda) |sin(phi-D) - sin(phi+D)|)``."""
    lo = cluster.mean_aoa_rad - cluster.angular_spread_rad
    hi = cluster.mean_aoa_rad + cluster.angular_spread_rad
    if not (-HALF_PI < lo < hi < HALF_PI):
        raise DomainError("cluster must satisfy -pi/2 < phi - D < phi + D < pi/2")
    return float(min(1.0, geom.spacing_wavelengths * abs(np.sin(lo) - np.sin(hi))))
