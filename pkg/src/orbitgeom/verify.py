"""One-shot property suite over every module, used by ``orbitgeom verify``.

Each check reports a residual and the tolerance it must meet. Samples are
drawn from a single seeded generator per dimension, so the table is
deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import connection as conn
from . import core, dynamics, geometry as geo, qsl
from .errors import OrbitGeomError


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    n: int
    residual: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {"suite": self.suite, "name": self.name, "n": self.n, "residual": self.residual,
                "tolerance": self.tolerance, "passed": self.passed}


class _Table:
    def __init__(self, n: int):
        self.n = n
        self.rows: list[Check] = []

    def le(self, suite: str, name: str, residual: float, tol: float) -> None:
        r = float(residual)
        self.rows.append(Check(suite, name, self.n, r, tol, bool(np.isfinite(r) and r <= tol)))

    def gt(self, suite: str, name: str, value: float, floor: float = 0.0) -> None:
        v = float(value)
        self.rows.append(Check(suite, name, self.n, v, floor, bool(v > floor)))


def separated_gap(n: int) -> float:
    """Eigenvalue separation used for sampled spectra; it bounds the KKS weight spread."""
    return 1.0 / (n * (n - 1)) if n > 1 else 0.0


def loop_hamiltonian(n: int, rng, period: float = 2 * np.pi) -> np.ndarray:
    """Hamiltonian whose propagator is the identity at ``t = period``.

    The levels are distinct integers, so the loop is never stationary.
    """
    w = core.haar_unitary(n, rng)
    levels = (rng.permutation(n) - (n - 1) // 2).astype(float)
    return (2 * np.pi / period) * (w * levels) @ core.dagger(w)


def parallel_pure_hamiltonian(rho: core.DensityOperator, rng) -> np.ndarray:
    """``|psi><phi| + h.c.`` with ``phi`` orthogonal to the support of ``rho``."""
    n = rho.n
    z = rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1)
    hf = np.zeros((n, n), dtype=complex)
    hf[0, 1:] = z
    hf[1:, 0] = np.conj(z)
    return rho.from_frame(hf)


def _herm_core(t: _Table, rng, sigma) -> None:
    n = t.n
    spec, det, lin, cache = 0.0, 0.0, 0.0, 0.0
    for _ in range(10):
        psi = core.haar_unitary(n, rng)
        rho = core.density_from_frame(psi, sigma)
        spec = max(spec, np.max(np.abs(np.sort(np.linalg.eigvalsh(rho.matrix))[::-1] - sigma.expanded)))
        det = max(det, abs(abs(np.linalg.det(psi)) - 1))
        a, b = core.random_observable(n, rng), core.random_observable(n, rng)
        s = rng.standard_normal()
        lin = max(lin, abs(core.expectation(rho, a + s * b)
                           - core.expectation(rho, a) - s * core.expectation(rho, b)))
        cache = max(cache, core.fro(rho.reassembled() - rho.matrix) / core.fro(rho.matrix))
    t.le("herm-core", "spectrum preserved by density_from_frame", spec, 1e-10)
    t.le("herm-core", "|det| of Haar unitaries", det, 1e-10)
    t.le("herm-core", "expectation linear", lin, 1e-10)
    t.le("herm-core", "eigendecomposition cache", cache, 1e-10)


def _orbit_geometry(t: _Table, rng, sigma, spectra) -> None:
    n = t.n
    dim_gap = 0
    for s in spectra:
        rho = core.density_from_frame(core.haar_unitary(n, rng), s)
        dim_gap = max(dim_gap, abs(geo.orbit_dimension(s) - geo.numerical_orbit_dimension(rho)))
    t.le("orbit-geometry", "orbit dimension equals tangent rank", dim_gap, 0)

    anti = ham = jsq = gsym = jinv = equi = herm = 0.0
    gmin = np.inf
    for _ in range(8):
        rho = core.density_from_frame(core.haar_unitary(n, rng), sigma)
        x, y = geo.random_tangent(rho, rng), geo.random_tangent(rho, rng)
        scale = core.fro(x.matrix) * core.fro(y.matrix)
        anti = max(anti, abs(geo.symplectic_form(x, y) + geo.symplectic_form(y, x)) / scale)
        a = core.random_observable(n, rng)
        lhs, rhs = geo.hamiltonian_pairing_check(rho, a, x)
        ham = max(ham, abs(lhs - rhs) / (1 + abs(lhs)))
        jj = geo.complex_structure(geo.complex_structure(x))
        jsq = max(jsq, core.fro(jj.matrix + x.matrix) / core.fro(x.matrix))
        g_xy, g_yx = geo.kks_metric(rho, x, y), geo.kks_metric(rho, y, x)
        gsym = max(gsym, abs(g_xy - g_yx) / scale)
        jx, jy = geo.complex_structure(x), geo.complex_structure(y)
        jinv = max(jinv, abs(geo.kks_metric(rho, jx, jy) - g_xy) / scale)
        gram = geo.gram_matrix(rho, lambda u, v, r=rho: geo.kks_metric(r, u, v))
        gmin = min(gmin, np.linalg.eigvalsh(0.5 * (gram + gram.T))[0])
        w = core.haar_unitary(n, rng)
        rw = core.density_from_frame(w @ rho.frame, sigma)
        b = core.random_observable(n, rng)
        om = geo.kks_form(rho, a, b)
        om_w = geo.kks_form(rw, w @ a @ core.dagger(w), w @ b @ core.dagger(w))
        xw = geo.tangent_vector(rw, w @ x.matrix @ core.dagger(w), project=True)
        yw = geo.tangent_vector(rw, w @ y.matrix @ core.dagger(w), project=True)
        equi = max(equi, abs(om - om_w) / max(1, abs(om)),
                   abs(geo.kks_metric(rw, xw, yw) - g_xy) / scale)
        g, o = geo.hermitian_product(rho, x, jy)
        g0, o0 = geo.hermitian_product(rho, x, y)
        herm = max(herm, abs(g + o0) / scale, abs(o - g0) / scale)
    t.le("orbit-geometry", "omega antisymmetric", anti, 1e-10)
    t.le("orbit-geometry", "dA(X) = omega(X_A, X)", ham, 1e-9)
    t.le("orbit-geometry", "J^2 = -1", jsq, 1e-12)
    t.le("orbit-geometry", "g symmetric", gsym, 1e-10)
    t.gt("orbit-geometry", "g positive definite (min Gram eigenvalue)", gmin)
    t.le("orbit-geometry", "g J-invariant", jinv, 1e-10)
    t.le("orbit-geometry", "omega and g unitary equivariant", equi, 1e-10)
    t.le("orbit-geometry", "h(X, JY) = i h(X, Y)", herm, 1e-9)

    basis = geo.horizontal_basis(sigma)
    if basis:
        gram = np.array([[geo.inner(a, b) for b in basis] for a in basis])
        t.le("orbit-geometry", "E_alpha orthonormal", np.max(np.abs(gram - np.eye(len(basis)))), 1e-12)
    fib = red = 0.0
    for _ in range(8):
        psi = core.haar_unitary(n, rng)
        a, b = 1j * core.random_observable(n, rng), 1j * core.random_observable(n, rng)
        v = core.random_stabilizer_unitary(sigma, rng)
        # the same tangent vectors written at psi V
        av, bv = core.dagger(v) @ a @ v, core.dagger(v) @ b @ v
        fib = max(fib, abs(geo.submersion_metric(psi, a, b, sigma) - geo.submersion_metric(psi @ v, av, bv, sigma)))
        hor = geo.off_block_part(a, sigma)
        red = max(red, core.fro(geo.block_part(v @ hor @ core.dagger(v), sigma)) / max(core.fro(hor), 1e-300))
    t.le("orbit-geometry", "submersion metric fiber independent", fib, 1e-10)
    t.le("orbit-geometry", "Ad(U(sigma)) preserves m", red, 1e-10)


def _dynamics(t: _Table, rng, sigma) -> None:
    n = t.n
    rho0 = core.density_from_frame(core.haar_unitary(n, rng), sigma)
    h = core.random_observable(n, rng)
    traj = dynamics.evolve(rho0, h, np.linspace(0, 5, 1001))
    p = sigma.expanded
    drift = max(np.max(np.abs(np.sort(np.linalg.eigvalsh(s.matrix))[::-1] - p)) for s in traj.states)
    e = np.array([core.expectation(s, h) for s in traj.states])
    dh = np.array([qsl.uncertainty(s, h) for s in traj.states])
    frames = max(core.fro(core.density_from_frame(f, sigma).matrix - s.matrix)
                 for f, s in zip(traj.frames, traj.states))
    t.le("dynamics", "isospectral drift over 1000 steps", drift, 1e-9)
    t.le("dynamics", "energy conserved", np.ptp(e), 1e-9)
    t.le("dynamics", "Delta H conserved", np.ptp(dh), 1e-9)
    t.le("dynamics", "frames project to states", frames, 1e-9)
    psi = core.haar_unitary(n, rng)
    rho = core.density_from_frame(psi, sigma)
    z = dynamics.lift_field(psi, h)
    push = dynamics.pushforward(psi, z, sigma)
    t.le("dynamics", "lifted field pushes forward to X_H",
         core.fro(push - dynamics.hamiltonian_vector_field(rho, h).matrix), 1e-10)


def _connection(t: _Table, rng, sigma) -> None:
    n = t.n
    repro = equiv = proj = 0.0
    for _ in range(8):
        psi = core.haar_unitary(n, rng)
        xi = geo.block_part(1j * core.random_observable(n, rng), sigma)
        x = psi @ (1j * core.random_observable(n, rng))
        repro = max(repro, core.fro(conn.mechanical_connection(psi, psi @ xi, sigma) - xi))
        a = conn.mechanical_connection(psi, x, sigma)
        v = core.random_stabilizer_unitary(sigma, rng)
        av = conn.mechanical_connection(psi @ v, x @ v, sigma)
        equiv = max(equiv, core.fro(av - core.dagger(v) @ a @ v))
        proj = max(proj, core.fro(conn.mechanical_connection(psi, x - psi @ a, sigma)))
    t.le("connection", "A(psi xi) = xi", repro, 1e-10)
    t.le("connection", "A equivariant", equiv, 1e-10)
    t.le("connection", "A(X - psi A(X)) = 0", proj, 1e-10)

    h = loop_hamiltonian(n, rng)
    rho0 = core.density_from_frame(core.haar_unitary(n, rng), sigma)
    traj = dynamics.evolve(rho0, h, np.linspace(0, 2 * np.pi, 10001))
    psi0 = rho0.frame
    lift = conn.horizontal_lift(traj, psi0)
    t.le("connection", "lift horizontal", lift.max_residual, 1e-7)
    t.le("connection", "lift projects to states", conn.check_projection(lift, traj), 1e-8)
    ref = conn.geometric_phase(traj, psi0)
    gauge = 0.0
    for _ in range(5):
        v = core.random_stabilizer_unitary(sigma, rng)
        gauge = max(gauge, abs(conn.wrap_phase(conn.geometric_phase(traj, psi0 @ v).phase - ref.phase)))
    t.le("connection", "phase gauge invariant", gauge, 1e-7)
    disc = conn.discrete_holonomy(traj, psi0)
    t.le("connection", "phase matches discrete transport",
         abs(conn.wrap_phase(disc.phase - ref.phase)), 1e-5)


def _qsl(t: _Table, rng, sigma, starts: int) -> None:
    n = t.n
    pure = core.random_spectrum(n, rng, rank=1)
    gap = arc = 0.0
    for _ in range(4):
        u0, u1 = core.haar_unitary(n, rng), core.haar_unitary(n, rng)
        r0, r1 = core.density_from_frame(u0, pure), core.density_from_frame(u1, pure)
        fs = np.arccos(min(1.0, abs(np.vdot(u0[:, 0], u1[:, 0]))))
        for m in qsl.Metric:
            arc = max(arc, abs(qsl.geodesic_distance(r0, r1, m, starts=starts) - fs))
        chk = qsl.metric_uncertainty_check(r0, parallel_pure_hamiltonian(r0, rng))
        gap = max(gap, chk.parallel_gap)
    t.le("qsl", "pure-state distance equals arccos overlap", arc, 1e-6)
    t.le("qsl", "parallel pure: hbar^2 g(X_H, X_H) = Delta H^2", gap, 1e-9)

    bound = sat = 0.0
    for _ in range(2):
        rho0 = core.density_from_frame(core.haar_unitary(n, rng), sigma)
        h = core.random_observable(n, rng)
        tr = dynamics.evolve(rho0, h, np.linspace(0, 0.7, 201))
        rep = qsl.qsl_report(tr, "kks", starts=starts)
        # same geodesic as distance_bound_check: rhs = Delta E tau / hbar
        bound = max(bound, rep.distance - rep.delta_e * rep.tau_actual / tr.hbar)
        sat = max(sat, rep.saturation_ratio)
    t.le("qsl", "distance bound D <= integral Delta H / hbar (excess)", max(bound, 0.0), 1e-6)
    t.le("qsl", "saturation ratio <= 1", sat, 1 + 1e-6)

    for m in qsl.Metric:
        rs = [core.density_from_frame(core.haar_unitary(n, rng), sigma) for _ in range(3)]
        d = lambda a, b: qsl.geodesic_distance(a, b, m, starts=starts)  # noqa: E731
        d01, d10, d12, d02 = d(rs[0], rs[1]), d(rs[1], rs[0]), d(rs[1], rs[2]), d(rs[0], rs[2])
        w = core.haar_unitary(n, rng)
        rw = [core.density_from_frame(w @ r.frame, sigma) for r in rs[:2]]
        t.le("qsl", f"{m.value} distance symmetric", abs(d01 - d10), 1e-6)
        t.le("qsl", f"{m.value} triangle inequality (excess)", max(d02 - d01 - d12, 0.0), 1e-5)
        t.le("qsl", f"{m.value} distance unitary invariant", abs(d(rw[0], rw[1]) - d01), 1e-6)
        t.le("qsl", f"{m.value} d(rho, rho) = 0", d(rs[0], rs[0]), 1e-12)


def run_suite(n: int, seed: int = 42, starts: int = 3) -> list[Check]:
    """All property checks at dimension ``n``."""
    rng = np.random.default_rng([seed, n])
    t = _Table(n)
    sigma = core.random_spectrum(n, rng, min_gap=separated_gap(n))
    spectra = [sigma, core.random_spectrum(n, rng, rank=1), core.make_spectrum([1.0 / n], [n])]
    if n >= 3:
        spectra.append(core.make_spectrum([0.5, 0.5 / (n - 1)], [1, n - 1]))
    suites = [("herm-core", _herm_core, (sigma,)), ("dynamics", _dynamics, (sigma,))]
    if n >= 2:
        suites[1:1] = [("orbit-geometry", _orbit_geometry, (sigma, spectra))]
        suites += [("connection", _connection, (sigma,)), ("qsl", _qsl, (sigma, starts))]
    for suite, fn, args in suites:
        try:
            fn(t, rng, *args)
        except OrbitGeomError as exc:
            t.rows.append(Check(suite, f"raised {type(exc).__name__}: {exc}", n, float("inf"), 0.0, False))
    return t.rows


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple[Check, ...]
    seconds: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def format_table(self) -> str:
        lines = [f"{'n':>2}  {'suite':<15} {'check':<55} {'residual':>11} {'tol':>9}  status"]
        for c in self.checks:
            lines.append(f"{c.n:>2}  {c.suite:<15} {c.name:<55} {c.residual:>11.3e} "
                         f"{c.tolerance:>9.1e}  {'PASS' if c.passed else 'FAIL'}")
        return "\n".join(lines)


def verify(dims=(2, 3, 4), seed: int = 42, starts: int = 3) -> VerifyReport:
    t0 = time.perf_counter()
    checks = [c for n in dims for c in run_suite(n, seed, starts)]
    return VerifyReport(tuple(checks), time.perf_counter() - t0)
