"""Hermitian matrices, unitaries, spectra and density operators.

Matrices are plain complex ``numpy`` arrays; the ``as_*`` helpers validate
and return them. :class:`Spectrum` and :class:`DensityOperator` carry the
block structure that the rest of the package relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NegativeEigenvalue,
    NonNegligibleImaginaryPart,
    NotHermitian,
    NotSkewHermitian,
    NotUnitary,
    TraceNotOne,
    ValidationError,
)

MERGE_TOL = 1e-9
HERMITIAN_RTOL = 1e-12
UNITARY_TOL = 1e-10
TRACE_TOL = 1e-12
EIGEN_TOL = 1e-12

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _square(m, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}", field=name)
    return m


def fro(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def dagger(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(m, -1, -2))


def check_dims(*mats: np.ndarray) -> int:
    n = mats[0].shape[0]
    for m in mats[1:]:
        if m.shape[0] != n:
            raise DimensionMismatch(f"dimension mismatch: {n} vs {m.shape[0]}")
    return n


def as_observable(m, name: str = "observable") -> np.ndarray:
    """Validate a Hermitian matrix and return it exactly symmetrized."""
    m = _square(m, name)
    if fro(m - dagger(m)) > HERMITIAN_RTOL * max(fro(m), 1.0):
        raise NotHermitian(f"{name} is not Hermitian", field=name)
    return 0.5 * (m + dagger(m))


def as_lie_algebra(m, name: str = "generator") -> np.ndarray:
    """Validate an element of u(n) (skew-Hermitian)."""
    m = _square(m, name)
    if fro(m + dagger(m)) > HERMITIAN_RTOL * max(fro(m), 1.0):
        raise NotSkewHermitian(f"{name} is not skew-Hermitian", field=name)
    return 0.5 * (m - dagger(m))


def as_unitary(m, name: str = "frame") -> np.ndarray:
    m = _square(m, name)
    if fro(dagger(m) @ m - np.eye(m.shape[0])) > UNITARY_TOL:
        raise NotUnitary(f"{name} is not unitary", field=name)
    return m


def expm_skew(a: np.ndarray) -> np.ndarray:
    """exp(a) for skew-Hermitian ``a`` (or a stack) via the eigendecomposition of ia."""
    w, q = np.linalg.eigh(1j * np.asarray(a))
    return (q * np.exp(-1j * w)[..., None, :]) @ dagger(q)


def logm_unitary(u: np.ndarray) -> np.ndarray:
    """Principal logarithm of a unitary, eigen-angles in (-pi, pi].

    Uses the complex Schur form, which is diagonal for normal matrices.
    """
    t, z = scipy.linalg.schur(u, output="complex")
    ang = np.angle(np.diag(t))
    ang = np.where(ang <= -np.pi, ang + 2 * np.pi, ang)
    log = (z * (1j * ang)) @ dagger(z)
    return 0.5 * (log - dagger(log))


def logm_unitary_stack(u: np.ndarray, radius: float = 0.25) -> np.ndarray:
    """Principal logarithms of a stack ``(m, n, n)`` of unitaries.

    Entries with ``||U - I||_2 < radius`` use the Mercator series; the rest
    fall back to :func:`logm_unitary`.
    """
    u = np.asarray(u, dtype=complex)
    e = u - np.eye(u.shape[-1])
    near = np.linalg.norm(e, ord=2, axis=(-2, -1)) < radius
    out = np.empty_like(u)
    if near.any():
        x = e[near]
        term, acc = x.copy(), x.copy()
        for k in range(2, 80):
            term = -term @ x
            acc += term / k
            if np.max(np.abs(term)) / k < 1e-18:
                break
        out[near] = 0.5 * (acc - dagger(acc))
    for i in np.flatnonzero(~near):
        out[i] = logm_unitary(u[i])
    return out


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    """Distinct eigenvalues ``values`` (descending) with ``multiplicities``."""

    values: tuple[float, ...]
    multiplicities: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(self.multiplicities)

    @property
    def k(self) -> int:
        return len(self.values)

    @property
    def expanded(self) -> np.ndarray:
        """Eigenvalues repeated by multiplicity, descending (the diagonal of D)."""
        return np.repeat(np.array(self.values, dtype=float), self.multiplicities)

    def diagonal(self) -> np.ndarray:
        return np.diag(self.expanded).astype(complex)

    @property
    def labels(self) -> np.ndarray:
        """Block index of every basis position."""
        return np.repeat(np.arange(self.k), self.multiplicities)

    @property
    def block_mask(self) -> np.ndarray:
        """Boolean n x n mask of the block-diagonal (stabilizer) entries."""
        lab = self.labels
        return lab[:, None] == lab[None, :]

    def blocks(self) -> list[slice]:
        out, start = [], 0
        for m in self.multiplicities:
            out.append(slice(start, start + m))
            start += m
        return out

    def is_pure(self) -> bool:
        return (self.k <= 2 and self.multiplicities[0] == 1
                and abs(self.values[0] - 1.0) <= TRACE_TOL)

    def to_dict(self) -> dict:
        return {"values": list(self.values), "multiplicities": list(self.multiplicities)}


def make_spectrum(
    values: Sequence[float],
    multiplicities: Sequence[int] | None = None,
    merge_tol: float = MERGE_TOL,
) -> Spectrum:
    """Build a validated :class:`Spectrum`.

    Values within ``merge_tol`` of each other are merged into one block
    (multiplicity-weighted mean), which fixes the stabilizer block structure.

    Raises:
        NegativeEigenvalue: a value below ``-1e-12``.
        TraceNotOne: ``sum(n_i * p_i)`` differs from 1 by more than 1e-12.
    """
    values = [float(v) for v in values]
    if multiplicities is None:
        multiplicities = [1] * len(values)
    multiplicities = [int(m) for m in multiplicities]
    if not values or len(values) != len(multiplicities):
        raise ValidationError("values and multiplicities must be nonempty and equal length",
                              field="spectrum")
    if any(m < 1 for m in multiplicities):
        raise ValidationError("multiplicities must be positive", field="spectrum")
    if any(v < -EIGEN_TOL for v in values):
        raise NegativeEigenvalue(f"negative eigenvalue in {values}", field="spectrum")
    total = sum(v * m for v, m in zip(values, multiplicities))
    if abs(total - 1.0) > TRACE_TOL:
        raise TraceNotOne(f"trace of spectrum is {total!r}, expected 1", field="spectrum")

    pairs = sorted(zip(values, multiplicities), key=lambda p: -p[0])
    merged: list[list[float]] = []  # [weighted sum, multiplicity, last value]
    for v, m in pairs:
        if merged and merged[-1][2] - v <= merge_tol:
            merged[-1][0] += v * m
            merged[-1][1] += m
            merged[-1][2] = v
        else:
            merged.append([v * m, m, v])
    vals = tuple(max(s / m, 0.0) for s, m, _ in merged)
    mults = tuple(int(m) for _, m, _ in merged)
    return Spectrum(vals, mults)


def spectrum_from_eigenvalues(eigs: Sequence[float], merge_tol: float = MERGE_TOL) -> Spectrum:
    return make_spectrum(list(eigs), [1] * len(eigs), merge_tol)


# ---------------------------------------------------------------------------
# Density operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A point of the orbit D(sigma).

    ``frame`` is a unitary eigenbasis whose columns follow
    ``spectrum.expanded`` (descending), so ``matrix = frame D frame^dagger``.
    """

    matrix: np.ndarray
    spectrum: Spectrum
    frame: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.expanded

    def reassembled(self) -> np.ndarray:
        return (self.frame * self.eigenvalues) @ dagger(self.frame)

    def in_frame(self, m: np.ndarray) -> np.ndarray:
        """Express a lab-frame operator in the eigenbasis."""
        return dagger(self.frame) @ m @ self.frame

    def from_frame(self, m: np.ndarray) -> np.ndarray:
        return self.frame @ m @ dagger(self.frame)

    @classmethod
    def from_matrix(cls, m, merge_tol: float = MERGE_TOL) -> "DensityOperator":
        """Validate a density matrix and cache its eigendecomposition.

        Raises:
            NotHermitian, TraceNotOne, NegativeEigenvalue
        """
        m = as_observable(m, "density matrix")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise TraceNotOne(f"trace is {tr!r}, expected 1", field="density matrix")
        w, q = np.linalg.eigh(m)
        if w[0] < -EIGEN_TOL:
            raise NegativeEigenvalue(f"eigenvalue {w[0]!r} < 0", field="density matrix")
        w, q = w[::-1], q[:, ::-1]
        # renormalize the eigenvalue sum exactly before merging
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        sigma = spectrum_from_eigenvalues(w, merge_tol)
        return cls(_frozen(m), sigma, _frozen(q))

    def __repr__(self) -> str:
        return f"DensityOperator(n={self.n}, spectrum={self.spectrum})"


def density_from_frame(psi, sigma: Spectrum) -> DensityOperator:
    """Return rho = psi D psi^dagger with D = diag(sigma expanded).

    Raises:
        DimensionMismatch: ``psi`` is not ``sigma.n`` square.
    """
    psi = as_unitary(psi)
    if psi.shape[0] != sigma.n:
        raise DimensionMismatch(f"frame is {psi.shape[0]}-dimensional, spectrum {sigma.n}")
    rho = (psi * sigma.expanded) @ dagger(psi)
    rho = 0.5 * (rho + dagger(rho))
    return DensityOperator(_frozen(rho), sigma, _frozen(psi))


def densities_from_frames(frames: np.ndarray, sigma: Spectrum) -> list[DensityOperator]:
    """Vectorized :func:`density_from_frame` for a stack ``(m, n, n)`` of frames.

    Raises:
        DimensionMismatch, NotUnitary
    """
    frames = np.asarray(frames, dtype=complex)
    if frames.ndim != 3 or frames.shape[1:] != (sigma.n, sigma.n):
        raise DimensionMismatch(f"frames have shape {frames.shape}, spectrum {sigma.n}")
    dev = np.linalg.norm(dagger(frames) @ frames - np.eye(sigma.n), axis=(-2, -1))
    if dev.size and dev.max() > UNITARY_TOL:
        raise NotUnitary(f"frame {int(dev.argmax())} is not unitary", field="frame")
    rho = (frames * sigma.expanded) @ dagger(frames)
    rho = 0.5 * (rho + dagger(rho))
    return [DensityOperator(_frozen(r), sigma, _frozen(f)) for r, f in zip(rho, frames)]


def pure_state(vec) -> DensityOperator:
    """Rank-one density operator |v><v| for a (normalized here) vector."""
    v = np.asarray(vec, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    n = v.size
    sigma = make_spectrum([1.0, 0.0], [1, n - 1]) if n > 1 else make_spectrum([1.0])
    # complete v to a unitary frame with v as first column
    basis = np.column_stack([v, np.eye(n, dtype=complex)])
    q, _ = np.linalg.qr(basis)
    q = np.array(q[:, :n])
    q[:, 0] = v  # QR fixes the first column only up to a phase
    return density_from_frame(q, sigma)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_unitary(n: int, seed=None) -> np.ndarray:
    """Haar-distributed element of U(n): QR of a complex Ginibre matrix with
    the diagonal phases of R moved into Q."""
    if n < 1:
        raise ValidationError("n must be >= 1", field="n")
    rng = _rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_observable(n: int, seed=None, scale: float = 1.0) -> np.ndarray:
    """GUE-style Hermitian matrix multiplied by ``scale``."""
    if n < 1:
        raise ValidationError("n must be >= 1", field="n")
    if scale <= 0:
        raise ValidationError("scale must be positive", field="scale")
    rng = _rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    return scale * 0.5 * (z + dagger(z))


def random_stabilizer_unitary(sigma: Spectrum, seed=None) -> np.ndarray:
    """Haar element of U(sigma) = U(n_1) x ... x U(n_k), block diagonal."""
    rng = _rng(seed)
    v = np.zeros((sigma.n, sigma.n), dtype=complex)
    for blk in sigma.blocks():
        m = blk.stop - blk.start
        v[blk, blk] = haar_unitary(m, rng)
    return v


def random_spectrum(n: int, seed=None, rank: int | None = None, min_gap: float = 0.0) -> Spectrum:
    """Generic (nondegenerate on its support) spectrum of dimension ``n``.

    With ``min_gap > 0`` the nonzero eigenvalues are redrawn until adjacent
    ones differ by at least ``min_gap``.

    Raises:
        ValidationError: ``min_gap`` cannot be met by ``rank`` values summing to 1.
    """
    rng = _rng(seed)
    rank = n if rank is None else rank
    if min_gap * rank * (rank - 1) / 2 >= 1.0:
        raise ValidationError("min_gap too large for the rank", field="min_gap")
    while True:
        p = np.sort(rng.dirichlet(np.ones(rank)))[::-1]
        if rank < 2 or np.min(-np.diff(p)) >= min_gap:
            break
    vals = list(p) + [0.0] * (n - rank)
    # exact unit trace before validation
    vals[0] += 1.0 - sum(vals)
    return spectrum_from_eigenvalues(vals)


# ---------------------------------------------------------------------------
# Expectation values
# ---------------------------------------------------------------------------


def expectation(rho: DensityOperator, a) -> float:
    """Tr(rho A) for a Hermitian observable ``A``.

    Raises:
        DimensionMismatch, NonNegligibleImaginaryPart
    """
    a = as_observable(a)
    check_dims(rho.matrix, a)
    val = np.einsum("ij,ji->", rho.matrix, a)
    if abs(val.imag) > 1e-12 * max(1.0, fro(a)):
        raise NonNegligibleImaginaryPart(f"Tr(rho A) has imaginary part {val.imag!r}")
    return float(val.real)
