"""Mechanical connection on U(n) -> D(sigma), horizontal lifts and holonomy.

The structure group U(sigma) acts on frames from the right, ``psi -> psi V``,
with infinitesimal action ``xi -> psi xi`` for block-diagonal ``xi``.
Bundle pairings use the positive bi-invariant form ``-c Re Tr``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    Spectrum,
    as_unitary,
    dagger,
    density_from_frame,
    expm_skew,
    fro,
    logm_unitary_stack,
)
from .dynamics import Trajectory
from .errors import DimensionMismatch, FiberMismatch, MissingFrames, NotALoop, NotTangent, ValidationError
from .geometry import KILLING_SCALE, block_part, inner, off_block_part, stabilizer_basis

FIBER_TOL = 1e-8
LOOP_TOL = 1e-8
STABILIZER_RTOL = 1e-12


def as_stabilizer(xi, sigma: Spectrum) -> np.ndarray:
    """Validate an element of u(sigma): skew-Hermitian and block diagonal."""
    xi = np.asarray(xi, dtype=complex)
    if xi.shape != (sigma.n, sigma.n):
        raise DimensionMismatch(f"stabilizer element has shape {xi.shape}, expected n={sigma.n}")
    scale = max(fro(xi), 1.0)
    if fro(xi + dagger(xi)) > STABILIZER_RTOL * scale:
        raise ValidationError("stabilizer element is not skew-Hermitian")
    if fro(off_block_part(xi, sigma)) > STABILIZER_RTOL * scale:
        raise ValidationError("stabilizer element has off-block entries")
    return block_part(0.5 * (xi - dagger(xi)), sigma)


def _tangent_at(psi: np.ndarray, x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Left-trivialize ``x`` at ``psi``; raise if ``psi^dagger x`` is not in u(n)."""
    x = np.asarray(x, dtype=complex)
    if x.shape != psi.shape:
        raise DimensionMismatch(f"tangent shape {x.shape} does not match frame {psi.shape}")
    a = dagger(psi) @ x
    if fro(a + dagger(a)) > tol * max(fro(a), 1.0):
        raise NotTangent("psi^dagger X is not skew-Hermitian")
    return 0.5 * (a - dagger(a))


def momentum_map(psi, x, xi, sigma: Spectrum, c: float = KILLING_SCALE) -> float:
    """``J_psi(X)(xi) = B(X, psi xi)``, the metric momentum map."""
    psi = as_unitary(psi)
    a = _tangent_at(psi, x)
    xi = as_stabilizer(xi, sigma)
    return inner(a, xi, c)


def locked_inertia(psi, xi, eta, sigma: Spectrum, c: float = KILLING_SCALE) -> float:
    """``I_psi(xi)(eta) = B(psi xi, psi eta)``; independent of psi by bi-invariance."""
    psi = as_unitary(psi)
    xi, eta = as_stabilizer(xi, sigma), as_stabilizer(eta, sigma)
    return inner(_tangent_at(psi, psi @ xi), _tangent_at(psi, psi @ eta), c)


def mechanical_connection(psi, x, sigma: Spectrum, c: float = KILLING_SCALE) -> np.ndarray:
    """``A_psi(X) = I_psi^{-1} J_psi(X)`` as an element of u(sigma).

    Solved in an orthonormal basis of u(sigma); for the bi-invariant pairing
    the result coincides with the block-diagonal part of ``psi^dagger X``.
    """
    psi = as_unitary(psi)
    if psi.shape[0] != sigma.n:
        raise DimensionMismatch("frame and spectrum dimensions differ")
    _tangent_at(psi, x)
    basis = stabilizer_basis(sigma, c)
    inertia = np.array([[locked_inertia(psi, e, f, sigma, c) for f in basis] for e in basis])
    mom = np.array([momentum_map(psi, x, e, sigma, c) for e in basis])
    coef = np.linalg.solve(inertia, mom)
    return np.tensordot(coef, np.array(basis), axes=1)


def connection_form(psi: np.ndarray, x: np.ndarray, sigma: Spectrum) -> np.ndarray:
    """Closed form of the mechanical connection: ``blk(psi^dagger X)``."""
    return block_part(_tangent_at(psi, x), sigma)


# ---------------------------------------------------------------------------
# Horizontal lifts
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HorizontalLift:
    times: np.ndarray
    frames: tuple[np.ndarray, ...] = field(repr=False)
    gauges: tuple[np.ndarray, ...] = field(repr=False)
    residuals: np.ndarray = field(repr=False)

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0


def _dynamical_frames(traj: Trajectory, psi0) -> tuple[np.ndarray, list[np.ndarray]]:
    if traj.frames is None:
        raise MissingFrames("trajectory was evolved without frames")
    psi0 = as_unitary(psi0, "psi0")
    sigma = traj.spectrum
    if psi0.shape[0] != sigma.n:
        raise DimensionMismatch("psi0 and trajectory dimensions differ")
    w = dagger(traj.frames[0]) @ psi0
    if fro(off_block_part(w, sigma)) > FIBER_TOL:
        raise FiberMismatch("psi0 does not lie over the initial state")
    rho0 = traj.states[0].matrix
    if fro((psi0 * sigma.expanded) @ dagger(psi0) - rho0) > FIBER_TOL:
        raise FiberMismatch("psi0 does not lie over the initial state")
    return psi0, [f @ w for f in traj.frames]


def _step_connections(traj: Trajectory, phis: np.ndarray) -> np.ndarray:
    """Block part of the left-trivialized dynamical velocity at every step midpoint."""
    sigma = traj.spectrum
    t = traj.times
    dt = np.diff(t)
    if traj.generator is None:
        z = logm_unitary_stack(dagger(phis[:-1]) @ phis[1:]) / dt[:, None, None]
    else:
        if traj.midpoint_hamiltonians is not None:
            hs = traj.midpoint_hamiltonians
        elif callable(traj.generator):
            hs = np.stack([traj.hamiltonian_at(s) for s in t[:-1] + 0.5 * dt])
        else:
            hs = traj.generator[None]
        w, q = np.linalg.eigh(hs)
        half = (q * np.exp(-0.5j * w * dt[:, None] / traj.hbar)[:, None, :]) @ dagger(q)
        mid = half @ phis[:-1]
        z = dagger(mid) @ hs @ mid / (1j * traj.hbar)
    z = 0.5 * (z - dagger(z))
    return block_part(z, sigma)


def horizontal_lift(traj: Trajectory, psi0) -> HorizontalLift:
    """Parallel transport of ``psi0`` along the trajectory.

    The lift is ``psi(t) = U(t) psi0 V(t)`` with ``V`` in U(sigma) solving
    ``dV/dt = -a(t) V``, ``a`` the connection value of the dynamical
    velocity. Steps use ``V <- exp(-dt a(t_mid)) V`` so V stays in U(sigma).

    ``residuals[m]`` is ``||blk(log(psi_m^dagger psi_{m+1}))|| / dt``, the
    connection value of the discrete velocity at the step midpoint.

    Raises:
        MissingFrames, FiberMismatch
    """
    sigma = traj.spectrum
    psi0, phis = _dynamical_frames(traj, psi0)
    phis = np.stack(phis)
    t = traj.times
    if len(t) < 2:
        return HorizontalLift(t, (phis[0],), (np.eye(sigma.n, dtype=complex),), np.zeros(0))
    dt = np.diff(t)
    steps = expm_skew(-dt[:, None, None] * _step_connections(traj, phis))
    gauges = np.empty_like(phis)
    gauges[0] = np.eye(sigma.n)
    for m, e in enumerate(steps):
        gauges[m + 1] = e @ gauges[m]
    frames = phis @ gauges
    logs = logm_unitary_stack(dagger(frames[:-1]) @ frames[1:])
    res = np.linalg.norm(block_part(logs, sigma), axis=(-2, -1)) / dt
    return HorizontalLift(t, tuple(frames), tuple(gauges), res)


@dataclass(frozen=True, eq=False)
class HolonomyResult:
    """Endpoint of the horizontal lift and the geometric phase of the loop.

    ``holonomy = psi0^dagger transport`` lies in U(sigma); ``trace`` is the
    complex number whose argument is ``phase``.
    """

    transport: np.ndarray = field(repr=False)
    holonomy: np.ndarray = field(repr=False)
    phase: float
    trace: complex
    max_residual: float = 0.0


def wrap_phase(x: float) -> float:
    """Map an angle to (-pi, pi]."""
    y = float(np.angle(np.exp(1j * x)))
    return np.pi if y <= -np.pi else y


def phase_of_holonomy(psi0: np.ndarray, transport: np.ndarray, sigma: Spectrum):
    """``arg Tr(psi0^dagger Pi psi0)``.

    ``psi0`` enters as the amplitude ``psi0 sqrt(D)`` (so that
    ``pi(psi) = psi psi^dagger``) and ``Pi = transport psi0^dagger`` maps the
    initial fiber to the final one; the trace equals ``Tr(D Hol)``.
    """
    amp = psi0 * np.sqrt(sigma.expanded)
    pi_op = transport @ dagger(psi0)
    tr = complex(np.trace(dagger(amp) @ pi_op @ amp))
    return wrap_phase(np.angle(tr)), tr


def _require_loop(traj: Trajectory) -> None:
    gap = fro(traj.states[-1].matrix - traj.states[0].matrix)
    if gap > LOOP_TOL:
        raise NotALoop(f"trajectory endpoints differ by {gap:.3e}")


def geometric_phase(traj: Trajectory, psi0) -> HolonomyResult:
    """Holonomy and geometric phase of a closed trajectory.

    Raises:
        NotALoop: endpoints differ by more than 1e-8 (Frobenius).
        FiberMismatch, MissingFrames
    """
    _require_loop(traj)
    lift = horizontal_lift(traj, psi0)
    psi0 = lift.frames[0]
    transport = lift.frames[-1]
    hol = dagger(psi0) @ transport
    phase, tr = phase_of_holonomy(psi0, transport, traj.spectrum)
    return HolonomyResult(transport, hol, phase, tr, lift.max_residual)


def discrete_holonomy(traj: Trajectory, psi0) -> HolonomyResult:
    """Holonomy from discrete parallel transport (no ODE).

    Consecutive frames are gauge-fixed so that every eigenblock of the
    overlap ``chi_m^dagger chi_{m+1}`` is positive Hermitian, using the
    polar factor of that block.
    """
    _require_loop(traj)
    sigma = traj.spectrum
    psi0, phis = _dynamical_frames(traj, psi0)
    phis = np.stack(phis)
    ov = dagger(phis[:-1]) @ phis[1:]
    fix = np.zeros_like(ov)
    for blk in sigma.blocks():
        u, _, vh = np.linalg.svd(ov[:, blk, blk])
        fix[:, blk, blk] = dagger(u @ vh)
    g = np.eye(sigma.n, dtype=complex)
    for f in fix:
        g = f @ g
    chi = phis[-1] @ g
    hol = dagger(psi0) @ chi
    phase, tr = phase_of_holonomy(psi0, chi, sigma)
    return HolonomyResult(chi, hol, phase, tr)


def fiber_frame(traj: Trajectory, v) -> np.ndarray:
    """The frame ``psi_ref V`` over the initial state, for V in U(sigma)."""
    return traj.frames[0] @ np.asarray(v)


def check_projection(lift: HorizontalLift, traj: Trajectory) -> float:
    """Largest ``||pi(psi(t)) - rho(t)||`` along a lift."""
    sigma = traj.spectrum
    return max(fro(density_from_frame(f, sigma).matrix - s.matrix)
               for f, s in zip(lift.frames, traj.states))
