"""Geometry of the isospectral orbit D(sigma) = U(n)/U(sigma).

Tangent vectors at rho are Hermitian matrices whose eigenblock-diagonal part
(in the eigenbasis of rho) vanishes; in that basis the symplectic form,
complex structure and metrics act entrywise on the off-block entries.

Conventions (frozen by tests):

* KKS form: ``omega(X_A, X_B) = Tr(rho [A, B]) / (i hbar)`` with
  ``X_A = [A, rho] / (i hbar)``.
* Complex structure: ``(JX)_jk = -i sgn(p_j - p_k) X_jk``.
* ``g(X, Y) = omega(X, JY)``, which is then
  ``hbar * sum_jk Re(X_jk Y_kj) / |p_j - p_k|``.
* Trace pairing on u(n): ``B(X, Y) = c Re Tr(XY)`` with ``c = 1/2``;
  ``-B`` is positive definite and is what metrics use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DensityOperator,
    Spectrum,
    as_lie_algebra,
    as_observable,
    as_unitary,
    check_dims,
    dagger,
    fro,
)
from .errors import BasePointMismatch, DimensionMismatch, NonNegligibleImaginaryPart, NotTangent

KILLING_SCALE = 0.5
TANGENT_RTOL = 1e-10


# ---------------------------------------------------------------------------
# Lie algebra pairing and block structure
# ---------------------------------------------------------------------------


def killing_pairing(x, y, c: float = KILLING_SCALE) -> float:
    """Trace form ``c Re Tr(XY)``; negative definite on u(n)."""
    x, y = np.asarray(x), np.asarray(y)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} differ")
    return float(c * np.einsum("ij,ji->", x, y).real)


def inner(x, y, c: float = KILLING_SCALE) -> float:
    """Positive bi-invariant inner product ``-c Re Tr(XY)`` on u(n)."""
    return -killing_pairing(x, y, c)


def block_part(a: np.ndarray, sigma: Spectrum) -> np.ndarray:
    """Eigenblock-diagonal part of a frame-coordinate matrix (the h-component)."""
    return np.where(sigma.block_mask, a, 0.0)


def off_block_part(a: np.ndarray, sigma: Spectrum) -> np.ndarray:
    """Off-block part (the m-component)."""
    return np.where(sigma.block_mask, 0.0, a)


def gap_matrix(sigma: Spectrum) -> np.ndarray:
    """``p_k - p_j`` for every index pair (zero inside blocks)."""
    p = sigma.expanded
    return p[None, :] - p[:, None]


@dataclass(frozen=True, eq=False)
class BundleSplit:
    """Vertical (h) plus horizontal (m) decomposition of a u(n) element."""

    frame: np.ndarray
    vertical: np.ndarray
    horizontal: np.ndarray


def reductive_split(a, rho: DensityOperator) -> BundleSplit:
    """Split ``a`` in u(n) into its parts along and across the eigenblocks of rho.

    Both parts are returned in the lab basis; they are computed block-wise in
    the eigenbasis of ``rho``.
    """
    a = as_lie_algebra(a)
    check_dims(a, rho.matrix)
    af = rho.in_frame(a)
    vert = rho.from_frame(block_part(af, rho.spectrum))
    vert = 0.5 * (vert - dagger(vert))
    return BundleSplit(rho.frame, vert, a - vert)


def horizontal_basis(sigma: Spectrum, c: float = KILLING_SCALE) -> list[np.ndarray]:
    """Orthonormal basis E_alpha of m under ``-c Re Tr``.

    For index pairs (i, j) in different blocks this returns
    ``(e_ij - e_ji) / sqrt(2c)`` and ``i (e_ij + e_ji) / sqrt(2c)``; at
    ``c = 1`` the first family is ``(e_ij - e_ji) / sqrt(2)``.
    """
    n, lab = sigma.n, sigma.labels
    s = 1.0 / np.sqrt(2.0 * c)
    basis = []
    for i in range(n):
        for j in range(i + 1, n):
            if lab[i] == lab[j]:
                continue
            e = np.zeros((n, n), dtype=complex)
            e[i, j], e[j, i] = s, -s
            basis.append(e)
            f = np.zeros((n, n), dtype=complex)
            f[i, j], f[j, i] = 1j * s, 1j * s
            basis.append(f)
    return basis


def stabilizer_basis(sigma: Spectrum, c: float = KILLING_SCALE) -> list[np.ndarray]:
    """Orthonormal basis of u(sigma) = u(n_1) + ... + u(n_k) under ``-c Re Tr``."""
    n, lab = sigma.n, sigma.labels
    s = 1.0 / np.sqrt(2.0 * c)
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1j / np.sqrt(c)
        basis.append(e)
        for j in range(i + 1, n):
            if lab[i] != lab[j]:
                continue
            e = np.zeros((n, n), dtype=complex)
            e[i, j], e[j, i] = s, -s
            basis.append(e)
            f = np.zeros((n, n), dtype=complex)
            f[i, j], f[j, i] = 1j * s, 1j * s
            basis.append(f)
    return basis


def lie_algebra_basis(n: int) -> list[np.ndarray]:
    """A real basis of u(n) (n^2 elements, not normalized)."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1j
        basis.append(e)
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j], e[j, i] = 1, -1
            basis.append(e)
            f = np.zeros((n, n), dtype=complex)
            f[i, j], f[j, i] = 1j, 1j
            basis.append(f)
    return basis


# ---------------------------------------------------------------------------
# Tangent vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Hermitian tangent ``matrix`` at ``base``; off-block in the base eigenbasis."""

    base: DensityOperator
    matrix: np.ndarray = field(repr=False)

    @property
    def in_frame(self) -> np.ndarray:
        return self.base.in_frame(self.matrix)

    def __add__(self, other: "TangentVector") -> "TangentVector":
        _same_base(self.base, other.base)
        return TangentVector(self.base, self.matrix + other.matrix)

    def __mul__(self, s: float) -> "TangentVector":
        return TangentVector(self.base, s * self.matrix)

    __rmul__ = __mul__

    def __neg__(self) -> "TangentVector":
        return TangentVector(self.base, -self.matrix)


def tangent_vector(rho: DensityOperator, x, project: bool = False) -> TangentVector:
    """Validate ``x`` as a tangent at ``rho``.

    With ``project=True`` the block-diagonal part is removed instead of
    rejected.

    Raises:
        NotTangent: block-diagonal residual above ``1e-10 * ||x||``.
    """
    x = as_observable(x, "tangent")
    check_dims(x, rho.matrix)
    xf = rho.in_frame(x)
    blk = block_part(xf, rho.spectrum)
    if project:
        return tangent_from_frame(rho, off_block_part(xf, rho.spectrum))
    if fro(blk) > TANGENT_RTOL * max(fro(x), 1e-300) and fro(blk) > 1e-14:
        raise NotTangent(f"block-diagonal residual {fro(blk):.3e} in tangent")
    return TangentVector(rho, x)


def tangent_from_frame(rho: DensityOperator, xf: np.ndarray) -> TangentVector:
    """Tangent from eigenbasis coordinates (block entries are discarded)."""
    xf = off_block_part(xf, rho.spectrum)
    xf = 0.5 * (xf + dagger(xf))
    return TangentVector(rho, rho.from_frame(xf))


def tangent_basis(rho: DensityOperator) -> list[TangentVector]:
    """Real basis of the tangent space: Hermitian unit pairs across blocks."""
    n, lab = rho.n, rho.spectrum.labels
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            if lab[i] == lab[j]:
                continue
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            out.append(tangent_from_frame(rho, e))
            f = np.zeros((n, n), dtype=complex)
            f[i, j], f[j, i] = -1j, 1j
            out.append(tangent_from_frame(rho, f))
    return out


def random_tangent(rho: DensityOperator, seed=None) -> TangentVector:
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    n = rho.n
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return tangent_from_frame(rho, z + dagger(z))


def _same_base(a: DensityOperator, b: DensityOperator) -> None:
    if a is b:
        return
    if a.matrix.shape != b.matrix.shape or fro(a.matrix - b.matrix) > 1e-12:
        raise BasePointMismatch("tangent vectors live at different base points")


# ---------------------------------------------------------------------------
# Symplectic and Kähler structure
# ---------------------------------------------------------------------------


def kks_form(rho: DensityOperator, a, b, hbar: float = 1.0) -> float:
    """``omega_rho(X_A, X_B) = Tr(rho [A, B]) / (i hbar)``.

    Raises:
        DimensionMismatch, NonNegligibleImaginaryPart
    """
    a, b = as_observable(a), as_observable(b)
    check_dims(rho.matrix, a, b)
    val = np.trace(rho.matrix @ (a @ b - b @ a)) / (1j * hbar)
    if abs(val.imag) > 1e-10 * max(1.0, fro(a) * fro(b)):
        raise NonNegligibleImaginaryPart(f"KKS value has imaginary part {val.imag!r}")
    return float(val.real)


def symplectic_form(x: TangentVector, y: TangentVector, hbar: float = 1.0) -> float:
    """omega on tangent vectors, via ``omega(X, Y) = Tr(A_X Y)``.

    ``A_X`` is a Hamiltonian preimage of X; in the eigenbasis this is
    ``sum_jk i hbar X_jk Y_kj / (p_k - p_j)`` over off-block pairs.
    """
    _same_base(x.base, y.base)
    sigma = x.base.spectrum
    gaps = gap_matrix(sigma)
    mask = ~sigma.block_mask
    xf, yf = x.in_frame, y.in_frame
    terms = 1j * hbar * xf[mask] * yf.T[mask] / gaps[mask]
    return float(terms.sum().real)


def hamiltonian_preimage(x: TangentVector, hbar: float = 1.0) -> np.ndarray:
    """Observable A (off-block in the eigenbasis) whose Hamiltonian field is X."""
    sigma = x.base.spectrum
    gaps = gap_matrix(sigma)
    mask = ~sigma.block_mask
    af = np.zeros_like(x.in_frame)
    af[mask] = 1j * hbar * x.in_frame[mask] / gaps[mask]
    a = x.base.from_frame(af)
    return 0.5 * (a + dagger(a))


def hamiltonian_pairing_check(rho: DensityOperator, a, x: TangentVector, hbar: float = 1.0):
    """Both sides of ``dA(X) = omega(X_A, X)``.

    ``lhs = Tr(X A)`` is the derivative of ``Tr(rho A)`` along X and
    ``rhs`` is the KKS form of A against a Hamiltonian preimage of X.

    Returns:
        (lhs, rhs)
    """
    a = as_observable(a)
    check_dims(rho.matrix, a)
    _same_base(rho, x.base)
    lhs = float(np.einsum("ij,ji->", x.matrix, a).real)
    rhs = kks_form(rho, a, hamiltonian_preimage(x, hbar), hbar)
    return lhs, rhs


def complex_structure(x: TangentVector) -> TangentVector:
    """``(JX)_jk = -i sgn(p_j - p_k) X_jk`` in the eigenbasis of the base point."""
    sigma = x.base.spectrum
    p = sigma.expanded
    sgn = np.sign(p[:, None] - p[None, :])
    jf = -1j * sgn * x.in_frame
    return tangent_from_frame(x.base, jf)


def kks_metric(rho: DensityOperator, x: TangentVector, y: TangentVector,
               hbar: float = 1.0) -> float:
    """``g(X, Y) = omega(X, JY)`` (uncalibrated).

    Raises:
        BasePointMismatch
    """
    _same_base(rho, x.base)
    _same_base(rho, y.base)
    return symplectic_form(x, complex_structure(y), hbar)


def hermitian_product(rho: DensityOperator, x: TangentVector, y: TangentVector,
                      hbar: float = 1.0) -> tuple[float, float]:
    """``h = g + i omega`` returned as the pair ``(g(X, Y), omega(X, Y))``.

    With ``g = omega(., J.)`` this h is complex linear in its second slot,
    ``h(X, JY) = i h(X, Y)``, and antilinear in the first.
    """
    _same_base(rho, x.base)
    _same_base(rho, y.base)
    return kks_metric(rho, x, y, hbar), symplectic_form(x, y, hbar)


def gram_matrix(rho: DensityOperator, form) -> np.ndarray:
    basis = tangent_basis(rho)
    return np.array([[form(u, v) for v in basis] for u in basis])


# ---------------------------------------------------------------------------
# Submersion metric
# ---------------------------------------------------------------------------


def submersion_metric(psi, a, b, sigma: Spectrum, c: float = KILLING_SCALE) -> float:
    """Inner product of the horizontal parts of left-translated tangents.

    ``a`` and ``b`` are u(n) elements representing ``psi a`` and ``psi b``
    at ``psi``; the value is ``-c Re Tr(hor(a) hor(b))``.
    """
    psi = as_unitary(psi)
    a, b = as_lie_algebra(a), as_lie_algebra(b)
    if not (psi.shape == a.shape == b.shape) or psi.shape[0] != sigma.n:
        raise DimensionMismatch("frame, generators and spectrum dimensions differ")
    return inner(off_block_part(a, sigma), off_block_part(b, sigma), c)


def frame_generator(x: TangentVector) -> np.ndarray:
    """Horizontal u(n) element A (eigenbasis) with ``[A, D] = X`` in the eigenbasis."""
    sigma = x.base.spectrum
    gaps = gap_matrix(sigma)
    mask = ~sigma.block_mask
    af = np.zeros_like(x.in_frame)
    af[mask] = x.in_frame[mask] / gaps[mask]
    return 0.5 * (af - dagger(af))


def submersion_tangent_metric(x: TangentVector, y: TangentVector,
                              c: float = KILLING_SCALE) -> float:
    """The submersion metric expressed on orbit tangent vectors."""
    _same_base(x.base, y.base)
    return inner(frame_generator(x), frame_generator(y), c)


# ---------------------------------------------------------------------------
# Dimension
# ---------------------------------------------------------------------------


def orbit_dimension(sigma: Spectrum) -> int:
    """Real dimension ``n^2 - sum n_i^2`` of U(n)/U(n_1) x ... x U(n_k)."""
    return sigma.n ** 2 - sum(m * m for m in sigma.multiplicities)


def numerical_orbit_dimension(rho: DensityOperator, tol: float = 1e-9) -> int:
    """Rank of the span of ``[A_m, rho]`` over a basis of u(n)."""
    rows = []
    for a in lie_algebra_basis(rho.n):
        comm = a @ rho.matrix - rho.matrix @ a
        rows.append(np.concatenate([comm.real.ravel(), comm.imag.ravel()]))
    s = np.linalg.svd(np.array(rows), compute_uv=False)
    return int(np.sum(s > tol * max(s[0], 1.0))) if s.size else 0
