"""Energy dispersion, geodesic distance on the orbit and the speed limit.

Both orbit metrics are rescaled by one constant each so that on rank-one
orbits they reduce to the Fubini-Study metric ``Tr(X^2) / 2``, for which
``hbar^2 g(X_H, X_H) = Delta H^2`` (Mandelstam-Tamm). In eigenframe
coordinates a horizontal generator A has squared length
``sum_jk w_jk |A_jk|^2`` with

* ``kks``: ``w_jk = |p_j - p_k| / 2``
* ``submersion``: ``w_jk = 1 / 2``

Both are invariant under U(sigma), so each comes from a left-invariant
metric on U(n) that makes ``psi -> psi D psi^dagger`` a Riemannian
submersion. Distances are computed on U(n): by fiber minimization of the
principal logarithm for ``submersion`` (bi-invariant, geodesics are
one-parameter subgroups) and by shooting along horizontal Euler-Arnold
geodesics for ``kks``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .core import (
    DensityOperator,
    Spectrum,
    as_observable,
    check_dims,
    dagger,
    expm_skew,
    expectation,
    fro,
    logm_unitary,
    random_stabilizer_unitary,
)
from .dynamics import Trajectory, hamiltonian_vector_field
from .errors import NegativeRadicand, NoConvergence, NotIsospectral, ZeroDispersion
from .geometry import (
    KILLING_SCALE,
    TangentVector,
    block_part,
    kks_metric,
    off_block_part,
    submersion_tangent_metric,
)


class Metric(str, enum.Enum):
    KKS = "kks"
    SUBMERSION = "submersion"


def _metric(m) -> Metric:
    return Metric(m.value if isinstance(m, Metric) else str(m))


# ---------------------------------------------------------------------------
# Dispersion and parallelism
# ---------------------------------------------------------------------------


def average_energy(rho: DensityOperator, h) -> float:
    """``H(rho) = Tr(H rho)``."""
    return expectation(rho, h)


def uncertainty(rho: DensityOperator, h) -> float:
    """``Delta H = sqrt(Tr(H^2 rho) - Tr(H rho)^2)``.

    Radicands in ``[-1e-12, 0)`` are clamped to zero.

    Raises:
        NegativeRadicand: radicand below ``-1e-12`` (relative to ``||H||^2``).
    """
    h = as_observable(h, "hamiltonian")
    mean = expectation(rho, h)
    second = expectation(rho, h @ h)
    rad = second - mean * mean
    if rad < 0:
        if rad < -1e-12 * max(1.0, fro(h) ** 2):
            raise NegativeRadicand(f"variance radicand {rad!r} is negative")
        rad = 0.0
    return float(np.sqrt(rad))


@dataclass(frozen=True)
class ParallelCheck:
    parallel: bool
    residual: float

    def __bool__(self) -> bool:
        return self.parallel


def is_parallel(rho: DensityOperator, h, tol: float = 1e-10) -> ParallelCheck:
    """Whether every eigenblock-diagonal block of H (eigenbasis of rho) vanishes.

    ``residual`` is the largest block Frobenius norm.
    """
    h = as_observable(h, "hamiltonian")
    check_dims(rho.matrix, h)
    hf = rho.in_frame(h)
    res = max(fro(hf[b, b]) for b in rho.spectrum.blocks())
    return ParallelCheck(res <= tol, res)


# ---------------------------------------------------------------------------
# Calibrated metrics
# ---------------------------------------------------------------------------


def metric_scale(metric, hbar: float = 1.0, c: float = KILLING_SCALE) -> float:
    """Factor that maps the raw metric to the Fubini-Study normalization."""
    metric = _metric(metric)
    if metric is Metric.KKS:
        return 1.0 / (2.0 * hbar)
    return 1.0 / (2.0 * c)


def metric_weights(sigma: Spectrum, metric) -> np.ndarray:
    """Entry weights of the calibrated metric on horizontal generators."""
    metric = _metric(metric)
    p = sigma.expanded
    if metric is Metric.KKS:
        w = 0.5 * np.abs(p[:, None] - p[None, :])
    else:
        w = np.full((sigma.n, sigma.n), 0.5)
    return np.where(sigma.block_mask, 0.0, w)


def calibrated_metric(x: TangentVector, y: TangentVector, metric,
                      hbar: float = 1.0, c: float = KILLING_SCALE) -> float:
    metric = _metric(metric)
    scale = metric_scale(metric, hbar, c)
    if metric is Metric.KKS:
        return scale * kks_metric(x.base, x, y, hbar)
    return scale * submersion_tangent_metric(x, y, c)


@dataclass(frozen=True)
class UncertaintyCheck:
    lhs: float
    rhs: float
    holds: bool
    parallel: bool
    parallel_gap: float | None


def metric_uncertainty_check(rho: DensityOperator, h, metric="kks",
                             hbar: float = 1.0, tol: float = 1e-9) -> UncertaintyCheck:
    """Compare ``hbar^2 g(X_H, X_H)`` with ``Delta H^2``.

    ``holds`` reports ``lhs >= rhs - tol``. When H is parallel at rho,
    ``parallel_gap = |lhs - rhs|`` measures the equality case.
    """
    x = hamiltonian_vector_field(rho, h, hbar)
    lhs = hbar ** 2 * calibrated_metric(x, x, metric, hbar)
    rhs = uncertainty(rho, h) ** 2
    par = is_parallel(rho, h)
    gap = abs(lhs - rhs) if par.parallel else None
    return UncertaintyCheck(lhs, rhs, lhs >= rhs - tol, par.parallel, gap)


# ---------------------------------------------------------------------------
# Geodesic distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeodesicResult:
    """Outcome of a distance computation.

    ``generator`` is the initial horizontal velocity in the eigenframe of
    ``rho0`` (left-trivialized, unit time); ``endpoint_error`` the Frobenius
    mismatch of the geodesic's endpoint.
    """

    distance: float
    converged: bool
    metric: Metric
    generator: np.ndarray = field(repr=False)
    endpoint_error: float = 0.0
    horizontality: float = 0.0
    starts_converged: int = 0


def _check_isospectral(rho0: DensityOperator, rho1: DensityOperator, tol: float = 1e-9) -> Spectrum:
    s0, s1 = rho0.spectrum, rho1.spectrum
    if s0.multiplicities != s1.multiplicities or np.max(
            np.abs(np.subtract(s0.values, s1.values))) > tol:
        raise NotIsospectral(f"spectra differ: {s0} vs {s1}")
    return s0


def horizontal_coordinates(sigma: Spectrum) -> list[tuple[int, int]]:
    lab = sigma.labels
    return [(i, j) for i in range(sigma.n) for j in range(i + 1, sigma.n) if lab[i] != lab[j]]


def _from_coords(theta: np.ndarray, pairs, n: int) -> np.ndarray:
    a = np.zeros((n, n), dtype=complex)
    for q, (i, j) in enumerate(pairs):
        z = theta[2 * q] + 1j * theta[2 * q + 1]
        a[i, j] = z
        a[j, i] = -np.conj(z)
    return a


def _to_coords(a: np.ndarray, pairs) -> np.ndarray:
    out = np.empty(2 * len(pairs))
    for q, (i, j) in enumerate(pairs):
        out[2 * q], out[2 * q + 1] = a[i, j].real, a[i, j].imag
    return out


def weighted_norm(a: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sqrt(np.sum(weights * np.abs(a) ** 2)))


def _fiber_minimize(w0: np.ndarray, sigma: Spectrum, v: np.ndarray,
                    max_iter: int, gtol: float):
    """Minimize ``||log(w0 V)||_F^2 / 2`` over V in U(sigma) from ``v``."""
    def cost(vv):
        log = logm_unitary(w0 @ vv)
        return 0.5 * fro(log) ** 2, log

    f, log = cost(v)
    grad = block_part(log, sigma)
    it = 0
    while fro(grad) > gtol and it < max_iter:
        g = fro(grad)
        t = 1.0
        while True:
            v_new = v @ expm_skew(-t * grad)
            f_new, log_new = cost(v_new)
            grad_new = block_part(log_new, sigma)
            armijo = f_new <= f - 1e-4 * t * g * g
            # once f is flat to round-off, judge progress by the gradient
            flat = f_new <= f + 1e-14 * max(f, 1.0) and fro(grad_new) < g
            if armijo or flat:
                break
            t *= 0.5
            if t < 1e-8:
                return v, log, g
        v, f, log, grad = v_new, f_new, log_new, grad_new
        it += 1
    return v, log, fro(grad)


def _submersion_geodesic(rho0, rho1, sigma, starts, max_iter, gtol, rng):
    w0 = dagger(rho0.frame) @ rho1.frame
    found = []
    for s in range(starts):
        v = np.eye(sigma.n, dtype=complex) if s == 0 else random_stabilizer_unitary(sigma, rng)
        v, log, g = _fiber_minimize(w0, sigma, v, max_iter, gtol)
        found.append((0.5 * fro(log) ** 2, log, g))
    found.sort(key=lambda r: r[0])
    return found


def _herm_t(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def _expm_skew_stack(a: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(1j * a)
    return (q * np.exp(-1j * w)[..., None, :]) @ _herm_t(q)


def _euler_arnold_rhs(a: np.ndarray, w: np.ndarray, inv_w: np.ndarray) -> np.ndarray:
    m = w * a
    return inv_w * (m @ a - a @ m)


_G1, _G2 = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
_HERMITE = [(2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s, -2 * s**3 + 3 * s**2, s**3 - s**2)
            for s in (_G1, _G2)]


def shoot(a0: np.ndarray, weights: np.ndarray, steps: int) -> np.ndarray:
    """Endpoint ``psi(1)`` of the horizontal geodesic with ``psi(0) = I``.

    Solves ``psi' = psi A`` with ``(wA)' = [wA, A]`` (``w`` acting
    entrywise). A is advanced by classical RK4; the frame by the
    fourth-order Magnus step with A at the Gauss nodes taken from cubic
    Hermite interpolation. ``a0`` may be a stack ``(batch, n, n)``.
    """
    a0 = np.asarray(a0, dtype=complex)
    pos = weights[weights > 0]
    if pos.size == 0 or np.ptp(pos) <= 1e-15 * pos.max():
        # uniform weights: geodesics are one-parameter subgroups
        return _expm_skew_stack(a0)
    inv_w = np.divide(1.0, weights, out=np.zeros_like(weights), where=weights > 0)
    h = 1.0 / steps
    a = a0.copy()
    fa = _euler_arnold_rhs(a, weights, inv_w)
    psi = np.broadcast_to(np.eye(a0.shape[-1], dtype=complex), a0.shape).copy()
    for _ in range(steps):
        k1 = fa
        k2 = _euler_arnold_rhs(a + 0.5 * h * k1, weights, inv_w)
        k3 = _euler_arnold_rhs(a + 0.5 * h * k2, weights, inv_w)
        k4 = _euler_arnold_rhs(a + h * k3, weights, inv_w)
        a1 = a + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        f1 = _euler_arnold_rhs(a1, weights, inv_w)
        b1, b2 = (c0 * a + c1 * h * fa + c2 * a1 + c3 * h * f1 for c0, c1, c2, c3 in _HERMITE)
        om = 0.5 * h * (b1 + b2) - (np.sqrt(3) / 12) * h * h * (b2 @ b1 - b1 @ b2)
        psi = psi @ _expm_skew_stack(0.5 * (om - _herm_t(om)))
        a, fa = a1, f1
    return psi


def shoot_steps(a0: np.ndarray, weights: np.ndarray) -> int:
    """Initial step count for :func:`shoot`, scaled by ``||A||`` and the weight spread.

    Callers double it until the endpoint is resolved.
    """
    pos = weights[weights > 0]
    ratio = pos.max() / pos.min() if pos.size else 1.0
    return int(np.clip(np.ceil(12 * fro(a0) * ratio ** 0.25), 24, 4000))


def _kks_geodesic(rho0, rho1, sigma, candidates, starts, rng, tol):
    """Shoot KKS geodesics from the fiber minima of the submersion problem.

    A start that fails to converge directly is continued from the uniform
    weights (where it is an exact geodesic) to the KKS weights in stages
    whose weight ratios grow by at most a factor 2.
    """
    weights = metric_weights(sigma, Metric.KKS)
    pairs = horizontal_coordinates(sigma)
    n = sigma.n
    d = sigma.expanded
    target = dagger(rho0.frame) @ rho1.matrix @ rho0.frame
    iu = np.triu_indices(n)
    dim = 2 * len(pairs)
    pos = weights > 0
    ratio = weights[pos].max() / weights[pos].min()
    mean_w = np.exp(np.mean(np.log(weights[pos])))

    def endpoints(thetas, w, steps):
        psi = shoot(np.stack([_from_coords(t, pairs, n) for t in thetas]), w, steps)
        rho = (psi * d[None, None, :]) @ _herm_t(psi)
        r = (rho - target)[..., iu[0], iu[1]]
        return np.concatenate([r.real, r.imag], axis=-1)

    def lm(x0, w, steps):
        eps = 1e-7

        def fun(x):
            return endpoints(x[None], w, steps)[0]

        def jac(x):
            r = endpoints(np.concatenate([x + eps * np.eye(dim), x - eps * np.eye(dim)]), w, steps)
            return ((r[:dim] - r[dim:]) / (2 * eps)).T

        return scipy.optimize.least_squares(fun, x0, jac=jac, method="lm", xtol=1e-15,
                                            ftol=1e-15, gtol=1e-15, max_nfev=50 * (dim + 1)).x

    def solve(x, w):
        err, steps = np.inf, 0
        for _ in range(4):
            steps = max(2 * steps, shoot_steps(_from_coords(x, pairs, n), w))
            x = lm(x, w, steps)
            # the endpoint must also hold at twice the resolution
            err = float(np.linalg.norm(endpoints(x[None], w, 2 * steps)[0]))
            if err <= tol:
                break
        return x, err

    def continued(x):
        stages = int(np.ceil(np.log2(ratio)))
        for s in np.linspace(0.0, 1.0, stages + 1)[1:]:
            w = np.where(pos, mean_w ** (1 - s) * np.where(pos, weights, 1.0) ** s, 0.0)
            x, err = solve(x, w)
        return x, err

    inits = [_to_coords(off_block_part(c, sigma), pairs) for c in candidates]
    scale = max((np.linalg.norm(x) for x in inits), default=1.0)
    perturbed = len(inits)
    while len(inits) < starts:
        base = inits[len(inits) % max(len(candidates), 1)]
        inits.append(base + 0.3 * scale * rng.standard_normal(dim) / np.sqrt(dim))
    best, n_ok = None, 0
    for q, x0 in enumerate(inits):
        x, err = solve(x0, weights)
        if err > tol and q < perturbed and ratio > 2:
            x, err = continued(x0)
        if err > tol:
            continue
        n_ok += 1
        a0 = _from_coords(x, pairs, n)
        dist = weighted_norm(a0, weights)
        if best is None or dist < best[0]:
            best = (dist, a0, err)
    return best, n_ok


def find_geodesic(rho0: DensityOperator, rho1: DensityOperator, metric="submersion", *,
                  starts: int = 8, max_iter: int = 500, gtol: float = 1e-10,
                  seed=0, endpoint_tol: float = 1e-9) -> GeodesicResult:
    """Minimal geodesic between two isospectral states.

    ``submersion``: minimize the bi-invariant length of ``log(psi0^dagger psi1 V)``
    over V in U(sigma) (multi-start gradient descent on U(sigma)); the
    minimizer's logarithm is horizontal.

    ``kks``: shoot horizontal geodesics of the KKS metric from the
    submersion candidates (and perturbations); the KKS length of the best
    submersion geodesic is kept as an upper bound and returned, flagged
    unconverged, if no shot is shorter.

    Raises:
        NotIsospectral
    """
    metric = _metric(metric)
    sigma = _check_isospectral(rho0, rho1)
    rng = np.random.default_rng(seed)
    n = sigma.n
    if fro(rho0.matrix - rho1.matrix) <= 1e-14:
        return GeodesicResult(0.0, True, metric, np.zeros((n, n), dtype=complex), 0.0, 0.0, 1)
    if len(sigma.values) == 1:
        return GeodesicResult(0.0, True, metric, np.zeros((n, n), dtype=complex),
                              fro(rho0.matrix - rho1.matrix), 0.0, 1)

    found = _submersion_geodesic(rho0, rho1, sigma, max(starts, 1), max_iter, gtol, rng)
    f_best, log_best, g_best = found[0]
    if metric is Metric.SUBMERSION:
        gen = off_block_part(log_best, sigma)
        dist = float(np.sqrt(f_best))
        n_ok = sum(1 for r in found if r[2] <= gtol)
        return GeodesicResult(dist, g_best <= gtol, metric, gen, 0.0, g_best, n_ok)

    weights = metric_weights(sigma, Metric.KKS)
    # distinct local minima of the fiber problem seed the shooting
    cands = []
    for f, log, _ in found:
        if all(fro(log - c) > 1e-6 for c in cands):
            cands.append(log)
    upper = weighted_norm(off_block_part(log_best, sigma), weights)
    best, n_ok = _kks_geodesic(rho0, rho1, sigma, cands, max(starts, len(cands)), rng,
                               endpoint_tol)
    if best is None or best[0] > upper + 1e-12:
        return GeodesicResult(upper, False, metric, off_block_part(log_best, sigma), 0.0, 0.0, n_ok)
    return GeodesicResult(best[0], True, metric, best[1], best[2], 0.0, n_ok)


def geodesic_distance(rho0: DensityOperator, rho1: DensityOperator, metric="submersion",
                      **opts) -> float:
    """Geodesic distance on D(sigma) under the calibrated metric.

    Raises:
        NotIsospectral
        NoConvergence: carries the best value found as ``.best``.
    """
    res = find_geodesic(rho0, rho1, metric, **opts)
    if not res.converged:
        raise NoConvergence(f"{res.metric.value} distance did not converge", best=res.distance)
    return res.distance


def path_length(frames, sigma: Spectrum, metric="submersion") -> float:
    """Length of the piecewise curve ``psi_m exp(s log(psi_m^dagger psi_{m+1}))``.

    Block parts of the step logarithms are ignored (they are vertical), so
    for frames that are horizontal this is an upper bound on the distance.
    """
    weights = metric_weights(sigma, metric)
    total = 0.0
    for f0, f1 in zip(frames[:-1], frames[1:]):
        total += weighted_norm(logm_unitary(dagger(f0) @ f1), weights)
    return total


# ---------------------------------------------------------------------------
# Speed limit
# ---------------------------------------------------------------------------


def dispersion_series(traj: Trajectory) -> np.ndarray:
    return np.array([uncertainty(s, traj.hamiltonian_at(t)) for s, t in zip(traj.states, traj.times)])


def dispersion_integral(traj: Trajectory) -> float:
    """Trapezoidal ``integral Delta H dt``."""
    return float(np.trapezoid(dispersion_series(traj), traj.times))


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    converged: bool = True


def distance_bound_check(traj: Trajectory, metric="kks", tol: float = 1e-6, **opts) -> BoundCheck:
    """``D(rho_0, rho_tau) <= (1/hbar) integral Delta H dt`` on a trajectory."""
    res = find_geodesic(traj.states[0], traj.states[-1], metric, **opts)
    rhs = dispersion_integral(traj) / traj.hbar
    return BoundCheck(res.distance, rhs, res.distance <= rhs + tol, res.converged)


@dataclass(frozen=True)
class QslReport:
    """Speed-limit figures for one trajectory.

    ``bound = hbar * distance / delta_e`` is a lower bound on ``tau_actual``;
    ``saturation_ratio = bound / tau_actual`` lies in [0, 1].
    """

    tau_actual: float
    delta_e: float
    distance: float
    bound: float
    saturation_ratio: float
    metric_choice: Metric
    converged: bool = True

    @property
    def holds(self) -> bool:
        return self.tau_actual >= self.bound - 1e-6 * max(1.0, self.tau_actual)

    def to_dict(self) -> dict:
        return {
            "tau_actual": self.tau_actual,
            "delta_e": self.delta_e,
            "distance": self.distance,
            "bound": self.bound,
            "saturation_ratio": self.saturation_ratio,
            "metric_choice": self.metric_choice.value,
            "converged": self.converged,
            "holds": self.holds,
        }


def qsl_report(traj: Trajectory, metric="kks", **opts) -> QslReport:
    """Time-averaged dispersion, distance and the bound ``tau >= hbar D / Delta E``.

    Raises:
        ValueError: fewer than two samples.
        ZeroDispersion: Delta E = 0 although the endpoints differ.
    """
    metric = _metric(metric)
    if len(traj.times) < 2:
        raise ValueError("trajectory needs at least two samples")
    tau = traj.duration
    delta_e = dispersion_integral(traj) / tau
    res = find_geodesic(traj.states[0], traj.states[-1], metric, **opts)
    if res.distance <= 1e-12:
        return QslReport(tau, delta_e, 0.0, 0.0, 0.0, metric, res.converged)
    if delta_e <= 1e-15:
        raise ZeroDispersion("Delta E vanishes but the endpoints differ")
    bound = traj.hbar * res.distance / delta_e
    return QslReport(tau, delta_e, res.distance, bound, bound / tau, metric, res.converged)
