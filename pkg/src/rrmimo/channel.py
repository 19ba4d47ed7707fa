"""Clustered SIMO channel synthesis for a uniform linear array.

Covers the array response, per-cluster subpath channels, large-scale
fading, orthogonal pilots, received pilot blocks and spatial correlation
matrices (quadrature of the AoA integral or ensemble averages).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.linalg import toeplitz

from .errors import DomainError
from .rng import SeedLike, complex_normal, make_rng

HALF_PI = np.pi / 2
# Slack for angles computed as e.g. np.radians(90).
_ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class ArrayGeometry:
    num_antennas: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if int(self.num_antennas) != self.num_antennas or self.num_antennas < 2:
            raise DomainError(f"num_antennas must be an integer >= 2, got {self.num_antennas}")
        if not self.spacing_wavelengths > 0:
            raise DomainError(f"spacing_wavelengths must be positive, got {self.spacing_wavelengths}")

    @property
    def M(self) -> int:
        return int(self.num_antennas)


@dataclass(frozen=True)
class ClusterSpec:
    """One scattering cluster: mean AoA, half-width of the AoA spread, subpaths."""

    mean_aoa_rad: float
    angular_spread_rad: float
    num_subpaths: int = 20
    aoa_distribution: Literal["uniform", "fixed-offset"] = "uniform"

    def __post_init__(self):
        if not self.angular_spread_rad > 0:
            raise DomainError("angular spread must be positive")
        lo = self.mean_aoa_rad - self.angular_spread_rad
        hi = self.mean_aoa_rad + self.angular_spread_rad
        if not (lo > -HALF_PI and hi < HALF_PI):
            raise DomainError(
                f"cluster [{np.degrees(lo):.3f}, {np.degrees(hi):.3f}] deg escapes (-90, 90) deg"
            )
        if self.num_subpaths < 1:
            raise DomainError("num_subpaths must be >= 1")
        if self.aoa_distribution not in ("uniform", "fixed-offset"):
            raise DomainError(f"unknown aoa_distribution {self.aoa_distribution!r}")

    @classmethod
    def from_degrees(cls, mean_aoa_deg: float, spread_deg: float, **kwargs) -> "ClusterSpec":
        return cls(np.radians(mean_aoa_deg), np.radians(spread_deg), **kwargs)


@dataclass(frozen=True)
class LargeScaleFading:
    beta: float
    distance: float | None = None
    pathloss_exp: float | None = None
    shadow_sigma_db: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError("beta must be positive")

    @classmethod
    def sample(cls, distance: float, pathloss_exp: float, shadow_sigma_db: float,
               seed: SeedLike = None) -> "LargeScaleFading":
        """beta = s * d**-a with lognormal shadowing, 10*log10(s) ~ N(0, sigma^2)."""
        if distance <= 0:
            raise DomainError("distance must be positive")
        if pathloss_exp <= 2:
            raise DomainError("path-loss exponent must exceed 2")
        if shadow_sigma_db < 0:
            raise DomainError("shadowing std must be nonnegative")
        rng = make_rng(seed)
        s = 10.0 ** (shadow_sigma_db * rng.standard_normal() / 10.0)
        return cls(beta=float(s * distance ** (-pathloss_exp)), distance=distance,
                   pathloss_exp=pathloss_exp, shadow_sigma_db=shadow_sigma_db)


@dataclass(frozen=True, eq=False)
class PilotBlock:
    pilot: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pilot, dtype=complex).reshape(-1)
        if p.size < 1 or not np.vdot(p, p).real > 0:
            raise DomainError("pilot must be a nonzero vector")
        object.__setattr__(self, "pilot", p)

    @property
    def num_symbols(self) -> int:
        return self.pilot.size

    @property
    def pilot_energy(self) -> float:
        return float(np.vdot(self.pilot, self.pilot).real)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    h: np.ndarray
    clusters: tuple = ()

    @property
    def M(self) -> int:
        return self.h.size


@dataclass(frozen=True, eq=False)
class SpatialCorrelation:
    phi: np.ndarray
    source: Literal["analytic-integral", "ensemble-average", "pilot-estimated", "given"] = "given"
    num_blocks: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.phi.shape[0]


def _check_angle(aoa_rad) -> None:
    a = np.asarray(aoa_rad)
    if np.any(np.abs(a) > HALF_PI + _ANGLE_TOL) or np.any(~np.isfinite(a)):
        raise DomainError("AoA must lie in [-pi/2, pi/2]")


def steering_vector(geom: ArrayGeometry, aoa_rad) -> np.ndarray:
    """ULA response ``exp(-j 2 pi (i-1) (xi/lambda) sin(aoa))``.

    A scalar angle gives a length-M vector; an array of K angles gives an
    ``(M, K)`` matrix with one column per angle.
    """
    _check_angle(aoa_rad)
    idx = np.arange(geom.M)
    s = np.sin(np.asarray(aoa_rad, dtype=float))
    return np.exp(-2j * np.pi * geom.spacing_wavelengths * np.multiply.outer(idx, s))


def _as_cluster_list(clusters) -> list[ClusterSpec]:
    if isinstance(clusters, ClusterSpec):
        return [clusters]
    clusters = list(clusters)
    if not clusters:
        raise DomainError("at least one cluster is required")
    return clusters


def subpath_angles(cluster: ClusterSpec, rng: np.random.Generator, batch: int | None = None) -> np.ndarray:
    """Subpath AoAs of one cluster, shape ``(S,)`` or ``(batch, S)``."""
    S = cluster.num_subpaths
    shape = (S,) if batch is None else (batch, S)
    if cluster.aoa_distribution == "uniform":
        u = rng.uniform(-1.0, 1.0, size=shape)
    else:
        # midpoints of S equal cells across [-1, 1]; S=1 sits on the mean
        u = np.broadcast_to((2.0 * np.arange(1, S + 1) - 1.0 - S) / S, shape)
    return cluster.mean_aoa_rad + cluster.angular_spread_rad * u


def draw_channel(geom: ArrayGeometry, clusters, seed: SeedLike = None) -> ChannelRealization:
    """One normalized channel ``(LS)^-1/2 sum_l sum_s g_ls a(phi_ls)``."""
    clusters = _as_cluster_list(clusters)
    rng = make_rng(seed)
    h = np.zeros(geom.M, dtype=complex)
    S_total = 0
    for cl in clusters:
        angles = subpath_angles(cl, rng)
        g = complex_normal(rng, cl.num_subpaths)
        h += steering_vector(geom, angles) @ g
        S_total += cl.num_subpaths
    # L*S generalizes to the total subpath count when clusters differ in S
    return ChannelRealization(h / np.sqrt(S_total), tuple(clusters))


def draw_channels(geom: ArrayGeometry, clusters, num_draws: int, seed: SeedLike = None) -> np.ndarray:
    """``num_draws`` independent channels as the columns of an ``(M, n)`` matrix.

    Uncorrelated (i.i.d. CN(0, I)) channels are produced when ``clusters``
    is None.
    """
    rng = make_rng(seed)
    M = geom.M
    if clusters is None:
        return complex_normal(rng, (M, num_draws))
    clusters = _as_cluster_list(clusters)
    H = np.zeros((M, num_draws), dtype=complex)
    idx = np.arange(M)
    S_total = sum(cl.num_subpaths for cl in clusters)
    for cl in clusters:
        angles = subpath_angles(cl, rng, batch=num_draws)            # (n, S)
        g = complex_normal(rng, angles.shape)
        phase = -2j * np.pi * geom.spacing_wavelengths * np.sin(angles)
        # (M, n, S) summed over subpaths
        H += np.einsum("mns,ns->mn", np.exp(idx[:, None, None] * phase[None]), g)
    return H / np.sqrt(S_total)


def _gauss_legendre_column(geom: ArrayGeometry, cl: ClusterSpec, n: int) -> np.ndarray:
    x, w = np.polynomial.legendre.leggauss(n)
    theta = cl.mean_aoa_rad + cl.angular_spread_rad * x
    w = w / 2.0                      # uniform density over the cluster
    lag = np.arange(geom.M)
    return np.exp(-2j * np.pi * geom.spacing_wavelengths * np.outer(lag, np.sin(theta))) @ w


def correlation_analytic(geom: ArrayGeometry, cluster, quadrature_points: int = 64,
                         tol: float = 1e-9, max_points: int = 1 << 16) -> SpatialCorrelation:
    """Correlation of the uniform-AoA cluster model by Gauss-Legendre quadrature.

    ``[Phi]_ij = E{h_i h_j^*}`` depends only on ``i - j`` so only the first
    column is integrated.  The node count starts at ``quadrature_points``
    and doubles until the entries move by less than ``tol``.  A list of
    clusters yields the equal-weight mixture, matching the ``1/(LS)``
    normalization of :func:`draw_channel` for equal subpath counts.
    """
    if quadrature_points < 32:
        raise DomainError("quadrature_points must be >= 32")
    clusters = _as_cluster_list(cluster)
    col = np.zeros(geom.M, dtype=complex)
    nodes_used = []
    for cl in clusters:
        n = int(quadrature_points)
        c = _gauss_legendre_column(geom, cl, n)
        while True:
            if 2 * n > max_points:
                raise DomainError("quadrature failed to converge; cluster too wide for the array")
            c2 = _gauss_legendre_column(geom, cl, 2 * n)
            if np.max(np.abs(c2 - c)) < tol:
                break
            n, c = 2 * n, c2
        col += c2
        nodes_used.append(2 * n)
    col /= len(clusters)
    phi = toeplitz(col, col.conj())
    return SpatialCorrelation(phi, "analytic-integral", meta={"quadrature_nodes": nodes_used})


def correlation_ensemble(geom: ArrayGeometry, clusters, num_draws: int, seed: SeedLike = None,
                         batch: int = 1000) -> SpatialCorrelation:
    """Sample average of ``h h^H`` over independent channel draws."""
    if num_draws < 1:
        raise DomainError("num_draws must be >= 1")
    rng = make_rng(seed)
    acc = np.zeros((geom.M, geom.M), dtype=complex)
    done = 0
    while done < num_draws:
        n = min(batch, num_draws - done)
        H = draw_channels(geom, clusters, n, rng)
        acc += H @ H.conj().T
        done += n
    phi = acc / num_draws
    phi = 0.5 * (phi + phi.conj().T)
    return SpatialCorrelation(phi, "ensemble-average", meta={"num_draws": num_draws})


def make_pilot(T: int, K: int = 1, style: Literal["dft"] = "dft") -> list[PilotBlock]:
    """K mutually orthogonal unit-power pilots taken from DFT rows (``||p||^2 = T``)."""
    if style != "dft":
        raise DomainError(f"unsupported pilot style {style!r}")
    if K < 1 or T < K:
        raise DomainError(f"need T >= K >= 1, got T={T}, K={K}")
    t = np.arange(T)
    return [PilotBlock(np.exp(-2j * np.pi * k * t / T)) for k in range(K)]


def pilot_snr(beta: float, pilot: PilotBlock) -> float:
    """Average pre-detection pilot SNR ``alpha = beta ||p||^2 / T``."""
    return beta * pilot.pilot_energy / pilot.num_symbols


def beta_for_snr(alpha: float, pilot: PilotBlock) -> float:
    return alpha * pilot.num_symbols / pilot.pilot_energy


def _beta_value(b) -> float:
    return b.beta if isinstance(b, LargeScaleFading) else float(b)


def _vector(h) -> np.ndarray:
    return h.h if isinstance(h, ChannelRealization) else np.asarray(h, dtype=complex)


def synthesize_rx(h, lsfc, pilot, seed: SeedLike = None, noise_std: float = 1.0) -> np.ndarray:
    """Received pilot block ``Y = sum_k sqrt(beta_k) h_k p_k^H + N``.

    ``h``, ``lsfc`` and ``pilot`` are either single objects or equal-length
    sequences (one entry per user).  ``noise_std=0`` removes the noise.
    """
    if isinstance(pilot, PilotBlock):
        hs, betas, pilots = [h], [lsfc], [pilot]
    else:
        hs, betas, pilots = list(h), list(lsfc), list(pilot)
        if not (len(hs) == len(betas) == len(pilots)):
            raise DomainError("need one channel and one LSFC per pilot")
    T = pilots[0].num_symbols
    M = _vector(hs[0]).size
    Y = np.zeros((M, T), dtype=complex)
    for hk, bk, pk in zip(hs, betas, pilots):
        hv = _vector(hk)
        if hv.size != M or pk.num_symbols != T:
            raise DomainError("inconsistent channel or pilot dimensions")
        Y += np.sqrt(_beta_value(bk)) * np.outer(hv, pk.pilot.conj())
    if noise_std:
        Y += noise_std * complex_normal(make_rng(seed), (M, T))
    return Y


def is_hermitian(a: np.ndarray, tol: float = 1e-8) -> bool:
    a = np.asarray(a)
    scale = max(1.0, float(np.linalg.norm(a)))
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.linalg.norm(a - a.conj().T) <= tol * scale


def project_psd(phi: np.ndarray) -> np.ndarray:
    """Nearest (Frobenius) positive semidefinite matrix: clip negative eigenvalues."""
    phi = 0.5 * (phi + phi.conj().T)
    ev, V = np.linalg.eigh(phi)
    return (V * np.clip(ev, 0.0, None)) @ V.conj().T


def correlation_matrix(corr) -> np.ndarray:
    """Accept a :class:`SpatialCorrelation` or a raw square matrix."""
    return corr.phi if isinstance(corr, SpatialCorrelation) else np.asarray(corr)


def iter_clusters(specs: Iterable[tuple[float, float]], **kwargs) -> list[ClusterSpec]:
    """Build clusters from ``(mean_aoa_deg, spread_deg)`` pairs."""
    return [ClusterSpec.from_degrees(a, s, **kwargs) for a, s in specs]


__all__: Sequence[str] = [
    "ArrayGeometry", "ClusterSpec", "LargeScaleFading", "PilotBlock", "ChannelRealization",
    "SpatialCorrelation", "steering_vector", "draw_channel", "draw_channels",
    "correlation_analytic", "correlation_ensemble", "make_pilot", "synthesize_rx",
    "pilot_snr", "beta_for_snr", "project_psd", "is_hermitian", "correlation_matrix",
    "iter_clusters", "subpath_angles",
]
