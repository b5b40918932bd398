"""Von Neumann evolution on the orbit and its lift to U(n).

States are advanced by conjugation with exact unitary propagators, so every
sample is isospectral by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .core import (
    DensityOperator,
    Spectrum,
    as_observable,
    as_unitary,
    check_dims,
    dagger,
    densities_from_frames,
)
from .errors import DimensionMismatch, NonIncreasingGrid
from .geometry import TangentVector, gap_matrix, tangent_from_frame

Generator = Union[np.ndarray, Callable[[float], np.ndarray]]


def propagator(h: np.ndarray, dt: float, hbar: float = 1.0) -> np.ndarray:
    """``exp(-i h dt / hbar)`` from the eigendecomposition of Hermitian ``h``."""
    w, q = np.linalg.eigh(h)
    return (q * np.exp(-1j * w * dt / hbar)) @ dagger(q)


def hamiltonian_vector_field(rho: DensityOperator, h, hbar: float = 1.0) -> TangentVector:
    """``X_H(rho) = [H, rho] / (i hbar)``.

    Computed entrywise in the eigenbasis,
    ``X_jk = H_jk (p_k - p_j) / (i hbar)``, so the result is exactly off-block.
    """
    h = as_observable(h, "hamiltonian")
    check_dims(rho.matrix, h)
    hf = rho.in_frame(h)
    return tangent_from_frame(rho, hf * gap_matrix(rho.spectrum) / (1j * hbar))


def lift_field(psi, h, hbar: float = 1.0) -> np.ndarray:
    """Gauge-invariant lift ``X_H(psi) = H psi / (i hbar)`` at a frame."""
    psi = as_unitary(psi)
    h = as_observable(h, "hamiltonian")
    check_dims(psi, h)
    return h @ psi / (1j * hbar)


def pushforward(psi, z: np.ndarray, sigma: Spectrum) -> np.ndarray:
    """Differential of ``pi(psi) = psi D psi^dagger`` applied to ``z`` at ``psi``."""
    psi = np.asarray(psi)
    if psi.shape != z.shape or psi.shape[0] != sigma.n:
        raise DimensionMismatch("frame, tangent and spectrum dimensions differ")
    d = sigma.expanded
    return (z * d) @ dagger(psi) + (psi * d) @ dagger(z)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-sampled isospectral curve.

    ``frames[i]`` is a point of U(n) over ``states[i]``; it equals
    ``U(t_i) psi_ref`` where ``U`` is the accumulated propagator and
    ``psi_ref`` the eigenframe of the initial state. For a callable
    generator ``midpoint_hamiltonians`` caches its values at the step
    midpoints.
    """

    times: np.ndarray
    states: tuple[DensityOperator, ...]
    frames: tuple[np.ndarray, ...] | None = field(default=None, repr=False)
    generator: Generator | None = field(default=None, repr=False)
    hbar: float = 1.0
    midpoint_hamiltonians: np.ndarray | None = field(default=None, repr=False)

    @property
    def spectrum(self) -> Spectrum:
        return self.states[0].spectrum

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def hamiltonian_at(self, t: float) -> np.ndarray:
        if self.generator is None:
            raise ValueError("trajectory has no generator")
        if callable(self.generator):
            return as_observable(self.generator(t), "hamiltonian")
        return self.generator

    def propagators(self) -> list[np.ndarray]:
        """Accumulated ``U(t_i)`` with ``U(t_0) = I``."""
        if self.frames is None:
            raise ValueError("trajectory has no frames")
        ref = dagger(self.frames[0])
        return [f @ ref for f in self.frames]


def _check_grid(times) -> np.ndarray:
    t = np.asarray(times, dtype=float).ravel()
    if t.size < 1 or np.any(np.diff(t) <= 0):
        raise NonIncreasingGrid("time grid must be strictly increasing")
    return t


def evolve(rho0: DensityOperator, h: Generator, times, hbar: float = 1.0,
           record_frames: bool = True) -> Trajectory:
    """Integrate the von Neumann equation on a fixed grid.

    Each step conjugates by ``exp(-i H dt / hbar)``; a callable ``h(t)`` is
    sampled at the step midpoint (second order).

    Raises:
        NonIncreasingGrid
    """
    t = _check_grid(times)
    sigma = rho0.spectrum
    dt = np.diff(t)
    if callable(h):
        gen: Generator = h
        hs = np.stack([as_observable(h(s), "hamiltonian") for s in t[:-1] + 0.5 * dt]) if dt.size \
            else as_observable(h(float(t[0])), "hamiltonian")[None]
    else:
        gen = as_observable(h, "hamiltonian")
        hs = gen[None]
    check_dims(rho0.matrix, hs[0])
    w, q = np.linalg.eigh(hs)
    steps = (q * np.exp(-1j * w * dt[:, None] / hbar)[:, None, :]) @ dagger(q)
    frames = np.empty((len(t), sigma.n, sigma.n), dtype=complex)
    frames[0] = rho0.frame
    for m, step in enumerate(steps):
        frames[m + 1] = step @ frames[m]
    states = [rho0] + densities_from_frames(frames[1:], sigma)
    mids = hs if callable(h) and dt.size else None
    return Trajectory(t, tuple(states), tuple(frames) if record_frames else None, gen, hbar, mids)


def uniform_grid(t_final: float, steps: int, t0: float = 0.0) -> np.ndarray:
    return np.linspace(t0, t_final, steps + 1)
