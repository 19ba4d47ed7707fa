"""Unitary bases for transform-domain channel modeling.

All constructors return a :class:`Basis` whose columns are the basis
vectors.  Indices into a basis are 0-based throughout the package.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .channel import correlation_matrix, is_hermitian
from .errors import DomainError

BasisKind = Literal["klt", "dct2", "dft", "polynomial"]
UNITARY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Basis:
    q: np.ndarray
    kind: str

    @property
    def M(self) -> int:
        return self.q.shape[0]

    def unitarity_error(self) -> float:
        return float(np.linalg.norm(self.q.conj().T @ self.q - np.eye(self.M)))


@dataclass(frozen=True, eq=False)
class TruncatedBasis:
    parent: Basis
    support: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.support)

    @property
    def q_m(self) -> np.ndarray:
        return self.parent.q[:, list(self.support)]

    def projector(self) -> np.ndarray:
        qm = self.q_m
        return qm @ qm.conj().T


def basis_dct2(M: int) -> Basis:
    """Orthonormal DCT-2: column l is ``c_l cos(pi (2i-1)(l-1) / 2M)``."""
    if M < 2:
        raise DomainError("M must be >= 2")
    i = np.arange(1, M + 1)[:, None]
    ell = np.arange(M)[None, :]
    q = np.cos(np.pi * (2 * i - 1) * ell / (2 * M)) * np.sqrt(2.0 / M)
    q[:, 0] = np.sqrt(1.0 / M)
    return Basis(q, "dct2")


def basis_dft(M: int) -> Basis:
    """Unitary DFT with the ``exp(-j 2 pi (i-1)(k-1) / M) / sqrt(M)`` convention."""
    if M < 2:
        raise DomainError("M must be >= 2")
    n = np.arange(M)
    return Basis(np.exp(-2j * np.pi * np.outer(n, n) / M) / np.sqrt(M), "dft")


def basis_polynomial(M: int) -> Basis:
    """Discrete orthonormal polynomials from a Householder QR of ``[(i-1)^(j-1)]``.

    Columns are in ascending degree and R is made positive on its diagonal.
    The Vandermonde columns are scaled by their largest entry first; this
    leaves the nested column spans (and hence Q) unchanged and keeps the
    column norms finite.
    """
    if M < 2:
        raise DomainError("M must be >= 2")
    with np.errstate(over="ignore"):
        U = np.vander(np.arange(M, dtype=float), M, increasing=True)
    scale = np.abs(U).max(axis=0)
    if not np.all(np.isfinite(scale)):
        raise DomainError(f"Vandermonde matrix overflows at M={M}")
    Q, R = np.linalg.qr(U / scale)                 # LAPACK geqrf: Householder
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    Q = Q * signs
    err = np.max(np.abs(Q.T @ Q - np.eye(M)))
    if err > 1e-8:
        raise DomainError(f"polynomial basis lost orthogonality (max error {err:.2e})")
    return Basis(Q, "polynomial")


def _fix_phase(V: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    V = V.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size:
            lead = col[nz[0]]
            V[:, k] = col * (np.conj(lead) / abs(lead))
    return V


def klt_eig(corr) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and phase-fixed eigenvectors of a Hermitian matrix."""
    C = correlation_matrix(corr)
    if not is_hermitian(C):
        raise DomainError("KLT requires a Hermitian correlation matrix")
    C = 0.5 * (C + C.conj().T)
    if np.allclose(C.imag, 0.0, atol=0.0):
        C = C.real
    ev, V = np.linalg.eigh(C)
    order = np.argsort(-ev, kind="stable")
    return ev[order], _fix_phase(V[:, order])


def basis_klt(corr) -> Basis:
    """Karhunen-Loeve basis: eigenvectors sorted by descending eigenvalue."""
    return Basis(klt_eig(corr)[1], "klt")


def make_basis(kind: str, M: int, corr=None) -> Basis:
    if kind == "dct2" or kind == "dct":
        return basis_dct2(M)
    if kind == "dft":
        return basis_dft(M)
    if kind in ("polynomial", "poly"):
        return basis_polynomial(M)
    if kind == "klt":
        if corr is None:
            raise DomainError("the KLT basis needs a correlation matrix")
        return basis_klt(corr)
    raise DomainError(f"unknown basis kind {kind!r}")


def transform_variances(basis: Basis, corr) -> np.ndarray:
    """Diagonal of ``Q^H C Q`` (real part)."""
    C = correlation_matrix(corr)
    Q = basis.q
    return np.real(np.einsum("ij,ik,kj->j", Q.conj(), C, Q))


def coding_gain(basis: Basis, corr) -> float:
    """Arithmetic-to-geometric mean ratio of the transformed variances."""
    s2 = transform_variances(basis, corr)
    if np.any(s2 <= 0):
        raise DomainError(
            "nonpositive transformed variance; project the correlation onto the PSD cone "
            "(e.g. channel.project_psd) or add diagonal loading"
        )
    return float(np.mean(s2) / np.exp(np.mean(np.log(s2))))


def truncate(basis: Basis, support: Iterable[int]) -> TruncatedBasis:
    support = tuple(int(i) for i in support)
    if len(set(support)) != len(support):
        raise DomainError("support indices must be distinct")
    if any(i < 0 or i >= basis.M for i in support):
        raise DomainError(f"support index out of range [0, {basis.M})")
    return TruncatedBasis(basis, support)


def write_basis_csv(basis: Basis, path) -> None:
    """Row-major dump, each entry as an adjacent ``re,im`` column pair."""
    q = np.asarray(basis.q, dtype=complex)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in q:
            writer.writerow([f"{v:.17g}" for z in row for v in (z.real, z.imag)])


def read_basis_csv(path, kind: str = "given") -> Basis:
    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    return Basis(rows[:, 0::2] + 1j * rows[:, 1::2], kind)
