"""Channel energy spectra, dominant supports and the closed-form MSE terms."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .bases import Basis
from .channel import ArrayGeometry, _check_angle, correlation_matrix, steering_vector
from .errors import DomainError, InfeasibleSupportError


@dataclass(frozen=True, eq=False)
class LpmOperator:
    """Diagonal linear phase modulation ``W(phi)``."""

    phi_rad: float
    diag: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``W x`` (x may carry extra trailing columns)."""
        return self.diag.reshape((-1,) + (1,) * (np.ndim(x) - 1)) * x

    def apply_h(self, x: np.ndarray) -> np.ndarray:
        """``W^H x``."""
        return self.diag.conj().reshape((-1,) + (1,) * (np.ndim(x) - 1)) * x

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)

    def align(self, phi_mat: np.ndarray) -> np.ndarray:
        """``W^H Phi W``."""
        return self.diag.conj()[:, None] * phi_mat * self.diag[None, :]


def lpm(geom: ArrayGeometry, phi: float) -> LpmOperator:
    _check_angle(phi)
    return LpmOperator(float(phi), steering_vector(geom, phi))


@dataclass(frozen=True, eq=False)
class ChannelSpectrum:
    diag_b: np.ndarray
    basis_kind: str
    phi_used: float | None = None

    @property
    def M(self) -> int:
        return self.diag_b.size


@dataclass(frozen=True)
class DominantSupport:
    """Union of half-open index windows ``[start, stop)``; ``m`` is their total length."""

    m: int
    windows: tuple[tuple[int, int], ...]
    eta: float | None = None
    captured: float | None = None

    @property
    def indices(self) -> np.ndarray:
        if not self.windows:
            return np.zeros(0, dtype=int)
        return np.concatenate([np.arange(a, b) for a, b in self.windows])

    @classmethod
    def from_indices(cls, indices: Iterable[int], **kwargs) -> "DominantSupport":
        idx = np.unique(np.asarray(list(indices), dtype=int))
        return cls(m=int(idx.size), windows=_runs(idx), **kwargs)

    @classmethod
    def full(cls, M: int) -> "DominantSupport":
        return cls(m=M, windows=((0, M),))


def _runs(idx: np.ndarray) -> tuple[tuple[int, int], ...]:
    if idx.size == 0:
        return ()
    breaks = np.flatnonzero(np.diff(idx) != 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    stops = np.concatenate([idx[breaks] + 1, [idx[-1] + 1]])
    return tuple((int(a), int(b)) for a, b in zip(starts, stops))


def _geom_for(M: int, geom: ArrayGeometry | None) -> ArrayGeometry:
    if geom is None:
        return ArrayGeometry(M)
    if geom.M != M:
        raise DomainError("geometry size does not match the correlation matrix")
    return geom


def aligned_correlation(corr, phi: float | None, geom: ArrayGeometry | None = None) -> np.ndarray:
    """``W^H(phi) Phi W(phi)``, or ``Phi`` itself when ``phi`` is None."""
    P = correlation_matrix(corr)
    if phi is None:
        return P
    return lpm(_geom_for(P.shape[0], geom), phi).align(P)


def bias_matrix(basis: Basis, corr, phi: float | None = None,
                geom: ArrayGeometry | None = None) -> tuple[np.ndarray, ChannelSpectrum]:
    """Bias matrix ``Q^H W^H Phi W Q`` (or ``Q^H Phi Q`` without ``phi``) and its diagonal."""
    C = aligned_correlation(corr, phi, geom)
    if C.shape != basis.q.shape:
        raise DomainError("basis and correlation sizes differ")
    B = basis.q.conj().T @ C @ basis.q
    return B, ChannelSpectrum(np.real(np.diag(B)).copy(), basis.kind, phi)


def channel_spectrum(basis: Basis, corr, phi: float | None = None,
                     geom: ArrayGeometry | None = None) -> ChannelSpectrum:
    """Diagonal of the bias matrix without forming the full matrix."""
    C = aligned_correlation(corr, phi, geom)
    Q = basis.q
    return ChannelSpectrum(np.real(np.einsum("ij,ik,kj->j", Q.conj(), C, Q)), basis.kind, phi)


def imag_leakage(corr, phi: float, geom: ArrayGeometry | None = None) -> float:
    """``||Im(W^H Phi W)||_F / ||Phi||_F``: how far the aligned correlation is from real."""
    P = correlation_matrix(corr)
    C = aligned_correlation(P, phi, geom)
    return float(np.linalg.norm(C.imag) / np.linalg.norm(P))


def _diag(spec) -> np.ndarray:
    return spec.diag_b if isinstance(spec, ChannelSpectrum) else np.asarray(spec, dtype=float)


def _window_sums(d: np.ndarray, m: int) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(d)])
    return c[m:] - c[:-m]


def _suffix_argmax(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Running max of ``x[s:]`` and the smallest index attaining it."""
    n = x.size
    best = np.empty(n)
    arg = np.empty(n, dtype=int)
    cur, ci = -np.inf, n
    for s in range(n - 1, -1, -1):
        if x[s] >= cur:
            cur, ci = x[s], s
        best[s], arg[s] = cur, ci
    return best, arg


def best_window(d: np.ndarray, m: int) -> tuple[float, int]:
    """Largest energy over ``m`` consecutive indices; ties go to the smallest start."""
    sums = _window_sums(d, m)
    k = int(np.argmax(sums))
    return float(sums[k]), k


def best_window_pair(d: np.ndarray, m: int,
                     _cache: dict | None = None) -> tuple[float, tuple[tuple[int, int], ...]]:
    """Best pair of disjoint windows with total length ``m`` (a single window if ``m == 1``)."""
    M = d.size
    energy, k = best_window(d, m)
    best = (energy, ((k, k + m),))
    suffix = {} if _cache is None else _cache
    for l1 in range(1, m):
        l2 = m - l1
        s1 = _window_sums(d, l1)            # starts 0..M-l1
        if l2 not in suffix:
            suffix[l2] = _suffix_argmax(_window_sums(d, l2))
        smax, sarg = suffix[l2]
        n1 = M - l1 - l2 + 1               # s1 must leave room for window 2
        if n1 <= 0:
            continue
        tot = s1[:n1] + smax[l1:l1 + n1]
        i = int(np.argmax(tot))
        if tot[i] > best[0]:
            j = int(sarg[l1 + i])
            best = (float(tot[i]), ((i, i + l1), (j, j + l2)))
    energy, wins = best
    # touching windows are one window
    if len(wins) == 2 and wins[0][1] == wins[1][0]:
        wins = ((wins[0][0], wins[1][1]),)
    return energy, wins


def dominant_support(spec, eta: float, num_windows: int = 1,
                     total: float | None = None) -> DominantSupport:
    """Smallest total length whose best window(s) hold more than ``eta * M`` energy.

    ``total`` replaces ``M`` as the energy reference; pass the spectrum sum
    for estimated correlations whose trace is itself random.
    The search uses the raw spectrum (estimated spectra may hold negative
    entries); the reported ``captured`` fraction clamps entries at zero.
    Among equal-length windows the larger energy wins, then the smaller start.
    """
    if not 0 < eta < 1:
        raise DomainError("eta must lie in (0, 1)")
    if num_windows not in (1, 2):
        raise DomainError("num_windows must be 1 or 2")
    d = _diag(spec)
    M = d.size
    target = eta * (M if total is None else total)
    cache: dict = {}
    for m in range(1, M + 1):
        if num_windows == 1:
            energy, k = best_window(d, m)
            wins = ((k, k + m),)
        else:
            energy, wins = best_window_pair(d, m, cache)
        if energy > target:
            sup = DominantSupport(m=m, windows=wins, eta=eta)
            return DominantSupport(m=m, windows=wins, eta=eta,
                                   captured=captured_fraction(d, sup))
    raise InfeasibleSupportError(f"no support reaches eta={eta} of the spectrum energy")


def captured_fraction(spec, support) -> float:
    d = np.clip(_diag(spec), 0.0, None)
    return float(d[_support_indices(support, d.size)].sum() / d.size)


def _support_indices(support, M: int) -> np.ndarray:
    if support is None:
        return np.arange(M)
    if isinstance(support, DominantSupport):
        return support.indices
    return np.asarray(list(support), dtype=int)


def theoretical_variance(m: int, beta: float, pilot_energy: float) -> float:
    """Estimator variance ``m / (beta ||p||^2)``; independent of the basis."""
    if beta <= 0 or pilot_energy <= 0:
        raise DomainError("beta and pilot energy must be positive")
    return m / (beta * pilot_energy)


def theoretical_bias(spec, support) -> float:
    """Spectrum energy left outside the support."""
    d = _diag(spec)
    mask = np.ones(d.size, dtype=bool)
    mask[_support_indices(support, d.size)] = False
    return float(d[mask].sum())


def theoretical_mse(spec, support, beta: float, pilot_energy: float) -> float:
    m = _support_indices(support, _diag(spec).size).size
    return theoretical_variance(m, beta, pilot_energy) + theoretical_bias(spec, support)


def theoretical_nmse(spec, support, beta: float, pilot_energy: float) -> float:
    return theoretical_mse(spec, support, beta, pilot_energy) / _diag(spec).size


def mse_curve(spec, beta: float, pilot_energy: float) -> np.ndarray:
    """Theoretical MSE for m = 0..M using the best single window of each length."""
    d = _diag(spec)
    M = d.size
    total = d.sum()
    noise = 1.0 / (beta * pilot_energy)
    out = np.empty(M + 1)
    out[0] = total
    for m in range(1, M + 1):
        out[m] = m * noise + total - best_window(d, m)[0]
    return out


def optimal_order(spec, beta: float, pilot_energy: float,
                  window_constrained: bool = True) -> tuple[int, DominantSupport]:
    """MSE-minimizing modeling order and support.

    The window-constrained mode scans consecutive supports; ties resolve to
    the smaller order.  The unconstrained mode keeps exactly those indices
    whose energy exceeds the per-dimension noise ``1/(beta ||p||^2)``.
    """
    d = _diag(spec)
    if beta <= 0 or pilot_energy <= 0:
        raise DomainError("beta and pilot energy must be positive")
    if window_constrained:
        curve = mse_curve(d, beta, pilot_energy)
        m = int(np.argmin(curve))
        if m == 0:
            return 0, DominantSupport(0, ())
        _, k = best_window(d, m)
        return m, DominantSupport(m, ((k, k + m),))
    keep = np.flatnonzero(d > 1.0 / (beta * pilot_energy))
    sup = DominantSupport.from_indices(keep)
    return sup.m, sup


def write_spectrum_csv(spectra: Sequence[ChannelSpectrum] | ChannelSpectrum, path,
                       labels: Sequence[str] | None = None) -> None:
    """Columns ``index`` (1-based, as plotted) and one ``diag_b`` column per spectrum."""
    if isinstance(spectra, ChannelSpectrum):
        spectra = [spectra]
    labels = list(labels) if labels else (["diag_b"] if len(spectra) == 1
                                          else [f"diag_b_{i}" for i in range(len(spectra))])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", *labels])
        for i in range(spectra[0].M):
            w.writerow([i + 1, *(f"{s.diag_b[i]:.17g}" for s in spectra)])
