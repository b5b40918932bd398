"""Acceptance criteria 1-8, one printed PASS/FAIL line each.

Run under pytest (``pytest tests/test_acceptance.py -v``) or directly
(``python3 tests/test_acceptance.py``).
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg

sys.path.insert(0, str(Path(__file__).parent))

from orbitgeom import connection as conn  # noqa: E402
from orbitgeom import core, dynamics, geometry as geo, qsl  # noqa: E402
from orbitgeom.verify import loop_hamiltonian, parallel_pure_hamiltonian, separated_gap  # noqa: E402
from oracles import SX, SZ, fubini_study, latitude_ket, slope, solid_angle_phase  # noqa: E402


class Criterion:
    """Collects ``residual <= tol`` checks and renders one summary line."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.checks: list[tuple[str, float, float, bool]] = []
        self.notes: list[str] = []

    def le(self, name: str, value, tol: float):
        v = float(value)
        self.checks.append((name, v, tol, bool(np.isfinite(v) and v <= tol)))

    def true(self, name: str, ok: bool, value=float("nan")):
        self.checks.append((name, float(value), float("nan"), bool(ok)))

    @property
    def passed(self) -> bool:
        return all(c[3] for c in self.checks)

    def line(self) -> str:
        worst = [f"{n}={v:.2e}" for n, v, t, ok in self.checks if not ok]
        tail = f"failed: {', '.join(worst)}" if worst else f"{len(self.checks)} checks"
        note = f" | {'; '.join(self.notes)}" if self.notes else ""
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.title} ({tail}){note}"

    def details(self) -> str:
        return "\n".join(f"    {'ok ' if ok else 'BAD'} {n}: {v:.3e} (tol {t:.1e})" for n, v, t, ok in self.checks)


def _rho(n, rng, sigma):
    return core.density_from_frame(core.haar_unitary(n, rng), sigma)


def _unit(x):
    return x * (1.0 / core.fro(x.matrix))


# ---------------------------------------------------------------------------


def criterion_1() -> Criterion:
    c = Criterion(1, "orbit dimension equals tangent rank")
    rng = np.random.default_rng(1)
    spectra = [([1.0, 0.0], [1, 1]), ([0.7, 0.3], [1, 1]), ([0.5], [2]), ([0.5, 0.3, 0.2], [1, 1, 1]),
               ([0.5, 0.25], [1, 2]), ([0.4, 0.3, 0.2, 0.1], [1, 1, 1, 1])]
    for values, mults in spectra:
        s = core.make_spectrum(values, mults)
        gap = max(abs(geo.orbit_dimension(s) - geo.numerical_orbit_dimension(_rho(s.n, rng, s))) for _ in range(3))
        c.le(f"rank gap {tuple(values)}", gap, 0)
    for n in range(2, 9):
        s = core.make_spectrum([1.0, 0.0], [1, n - 1])
        c.le(f"pure n={n} dim - 2(n-1)", abs(geo.numerical_orbit_dimension(_rho(n, rng, s)) - 2 * (n - 1)), 0)
    return c


def criterion_2() -> Criterion:
    c = Criterion(2, "symplectic and Kaehler structure")
    rng = np.random.default_rng(2)
    r = dict(anti=0.0, ham=0.0, fd=0.0, jsq=0.0, gsym=0.0, jinv=0.0, equi=0.0)
    gmin = np.inf
    h = 1e-5
    for i in range(200):
        n = (2, 3, 4)[i % 3]
        sigma = core.random_spectrum(n, rng, min_gap=0.02)
        rho = _rho(n, rng, sigma)
        x, y = _unit(geo.random_tangent(rho, rng)), _unit(geo.random_tangent(rho, rng))
        r["anti"] = max(r["anti"], abs(geo.symplectic_form(x, y) + geo.symplectic_form(y, x)))
        a = core.random_observable(n, rng)
        lhs, rhs = geo.hamiltonian_pairing_check(rho, a, x)
        r["ham"] = max(r["ham"], abs(lhs - rhs) / (1 + abs(lhs)))
        xs = x * (1.0 / np.linalg.norm(geo.hamiltonian_preimage(x), 2))
        b = geo.hamiltonian_preimage(xs)
        f = lambda s: np.trace(scipy.linalg.expm(-1j * s * b) @ rho.matrix  # noqa: E731
                               @ scipy.linalg.expm(1j * s * b) @ a).real
        _, rhs_s = geo.hamiltonian_pairing_check(rho, a, xs)
        r["fd"] = max(r["fd"], abs((f(h) - f(-h)) / (2 * h) - rhs_s) / (1 + abs(rhs_s)))
        r["jsq"] = max(r["jsq"], core.fro(geo.complex_structure(geo.complex_structure(x)).matrix + x.matrix))
        g = geo.kks_metric(rho, x, y)
        r["gsym"] = max(r["gsym"], abs(g - geo.kks_metric(rho, y, x)))
        r["jinv"] = max(r["jinv"], abs(geo.kks_metric(rho, geo.complex_structure(x), geo.complex_structure(y)) - g))
        gram = geo.gram_matrix(rho, lambda u, v, rr=rho: geo.kks_metric(rr, u, v))
        gmin = min(gmin, np.linalg.eigvalsh(0.5 * (gram + gram.T))[0])
        w = core.haar_unitary(n, rng)
        rw = core.density_from_frame(w @ rho.frame, sigma)
        ad = lambda m, w=w: w @ m @ core.dagger(w)  # noqa: E731
        bb = core.random_observable(n, rng)
        om = geo.kks_form(rho, a, bb)
        xw, yw = geo.tangent_vector(rw, ad(x.matrix), project=True), geo.tangent_vector(rw, ad(y.matrix), project=True)
        r["equi"] = max(r["equi"], abs(geo.kks_form(rw, ad(a), ad(bb)) - om) / max(1.0, abs(om)),
                        abs(geo.kks_metric(rw, xw, yw) - g) / max(1.0, abs(g)))
    c.le("omega antisymmetry", r["anti"], 1e-10)
    c.le("dA(X) = omega(X_A, X)", r["ham"], 1e-9)
    c.le("finite difference at 1e-5", r["fd"], 1e-6)
    c.le("J^2 + 1", r["jsq"], 1e-12)
    c.le("g symmetry", r["gsym"], 1e-10)
    c.true("g positive definite", gmin > 0, gmin)
    c.le("g J-invariance", r["jinv"], 1e-10)
    c.le("unitary equivariance", r["equi"], 1e-10)
    return c


def criterion_3() -> Criterion:
    c = Criterion(3, "submersion metric")
    rng = np.random.default_rng(3)
    orth = fib = red = 0.0
    for values, mults in [([0.7, 0.3], [1, 1]), ([0.5, 0.3, 0.2], [1, 1, 1]), ([0.5, 0.25], [1, 2]),
                          ([0.4, 0.3, 0.2, 0.1], [1, 1, 1, 1]), ([0.4, 0.2], [1, 3]), ([1.0, 0.0], [1, 3])]:
        sigma = core.make_spectrum(values, mults)
        n = sigma.n
        basis = geo.horizontal_basis(sigma)
        gram = np.array([[geo.submersion_metric(np.eye(n), a, b, sigma) for b in basis] for a in basis])
        orth = max(orth, np.max(np.abs(gram - np.eye(len(basis)))))
        for _ in range(20):
            psi = core.haar_unitary(n, rng)
            a, b = 1j * core.random_observable(n, rng), 1j * core.random_observable(n, rng)
            v = core.random_stabilizer_unitary(sigma, rng)
            fib = max(fib, abs(geo.submersion_metric(psi, a, b, sigma)
                               - geo.submersion_metric(psi @ v, core.dagger(v) @ a @ v, core.dagger(v) @ b @ v, sigma)))
            hor = geo.off_block_part(a, sigma)
            red = max(red, core.fro(geo.block_part(v @ hor @ core.dagger(v), sigma)) / core.fro(hor))
    c.le("E_alpha orthonormal", orth, 1e-12)
    c.le("fiber independence", fib, 1e-10)
    c.le("Ad(U(sigma)) preserves horizontal space", red, 1e-10)
    return c


def criterion_4() -> Criterion:
    c = Criterion(4, "dynamics")
    rng = np.random.default_rng(4)
    drift = cons = 0.0
    for n in (2, 3, 4, 8):
        sigma = core.random_spectrum(n, rng)
        h = core.random_observable(n, rng)
        traj = dynamics.evolve(_rho(n, rng, sigma), h, np.linspace(0, 10, 1001))
        p = sigma.expanded
        drift = max(drift, max(np.max(np.abs(np.sort(np.linalg.eigvalsh(s.matrix))[::-1] - p)) for s in traj.states))
        cons = max(cons, np.ptp([core.expectation(s, h) for s in traj.states]),
                   np.ptp(qsl.dispersion_series(traj)))
    traj = dynamics.evolve(core.pure_state([1, 1]), SZ, np.linspace(0, np.pi / 2, 1001))
    c.le("isospectral drift, 1000 steps", drift, 1e-9)
    c.le("sigma_z maps |+> to |->", core.fro(traj.states[-1].matrix - 0.5 * np.array([[1, -1], [-1, 1]])), 1e-9)
    c.le("energy and Delta H conservation", cons, 1e-9)
    return c


def criterion_5() -> Criterion:
    c = Criterion(5, "connection and holonomy")
    rng = np.random.default_rng(5)
    ax = 0.0
    for n, sigma in [(2, core.make_spectrum([0.7, 0.3])), (3, core.make_spectrum([0.5, 0.25], [1, 2])),
                     (4, core.random_spectrum(4, rng))]:
        for _ in range(20):
            psi = core.haar_unitary(n, rng)
            xi = geo.block_part(1j * core.random_observable(n, rng), sigma)
            x = psi @ (1j * core.random_observable(n, rng))
            a = conn.mechanical_connection(psi, x, sigma)
            v = core.random_stabilizer_unitary(sigma, rng)
            ax = max(ax, core.fro(conn.mechanical_connection(psi, psi @ xi, sigma) - xi),
                     core.fro(conn.mechanical_connection(psi @ v, x @ v, sigma) - core.dagger(v) @ a @ v))
    c.le("connection axioms", ax, 1e-10)

    sigma = core.random_spectrum(3, rng, min_gap=0.1)
    rho0 = _rho(3, rng, sigma)
    h = loop_hamiltonian(3, rng)
    res = {m: conn.horizontal_lift(dynamics.evolve(rho0, h, np.linspace(0, 2 * np.pi, m + 1)), rho0.frame).max_residual
           for m in (2500, 5000, 10_000)}
    order = slope(list(res), list(res.values()))
    c.le("horizontality at 1e4 steps", res[10_000], 1e-7)
    c.le("refinement order |slope - 2|", abs(order - 2), 0.1)
    c.notes.append(f"residual order {order:.2f}")

    frame = lambda th: np.column_stack([latitude_ket(th), [-np.sin(th / 2), np.cos(th / 2)]])  # noqa: E731
    pure, mixed = core.make_spectrum([1.0, 0.0]), core.make_spectrum([0.7, 0.3])
    for th in (np.pi / 6, np.pi / 3, np.pi / 2):
        traj = dynamics.evolve(core.density_from_frame(frame(th), pure), SZ, np.linspace(0, np.pi, 10_001))
        ph = conn.geometric_phase(traj, traj.frames[0]).phase
        c.le(f"latitude phase theta={th:.3f}", abs(conn.wrap_phase(ph - solid_angle_phase(th))), 1e-5)
        traj = dynamics.evolve(core.density_from_frame(frame(th), mixed), SZ, np.linspace(0, np.pi, 10_001))
        a, b = conn.geometric_phase(traj, traj.frames[0]), conn.discrete_holonomy(traj, traj.frames[0])
        c.le(f"mixed loop vs discrete theta={th:.3f}", abs(conn.wrap_phase(a.phase - b.phase)), 1e-5)

    gauge = 0.0
    for sigma in (core.make_spectrum([0.7, 0.3]), core.make_spectrum([0.5, 0.25], [1, 2])):
        rho0 = _rho(sigma.n, rng, sigma)
        traj = dynamics.evolve(rho0, loop_hamiltonian(sigma.n, rng), np.linspace(0, 2 * np.pi, 10_001))
        ref = conn.geometric_phase(traj, rho0.frame).phase
        for _ in range(50):
            v = core.random_stabilizer_unitary(sigma, rng)
            gauge = max(gauge, abs(conn.wrap_phase(conn.geometric_phase(traj, rho0.frame @ v).phase - ref)))
    c.le("phase gauge invariance (50 V)", gauge, 1e-7)
    return c


def criterion_6() -> Criterion:
    c = Criterion(6, "speed limit and distance")
    rng = np.random.default_rng(6)
    traj = dynamics.evolve(core.pure_state([1, 0]), SX, np.linspace(0, np.pi / 2, 2001))
    rep = qsl.qsl_report(traj, "kks")
    c.le("Rabi D - pi/2", abs(rep.distance - np.pi / 2), 1e-6)
    c.le("Rabi Delta E - 1", abs(rep.delta_e - 1), 1e-6)
    c.le("Rabi bound - pi/2", abs(rep.bound - np.pi / 2), 1e-6)
    c.le("Rabi saturation - 1", abs(rep.saturation_ratio - 1), 1e-6)

    excess, ratio = 0.0, 0.0
    for i in range(20):
        n = 2 if i < 10 else 3
        sigma = core.random_spectrum(n, rng, min_gap=separated_gap(n))
        traj = dynamics.evolve(_rho(n, rng, sigma), core.random_observable(n, rng), np.linspace(0, 0.8, 201))
        chk = qsl.distance_bound_check(traj, "kks", starts=3)
        excess = max(excess, chk.lhs - chk.rhs if chk.converged else np.inf)
    c.le("distance bound excess, 20 trajectories", max(excess, 0.0), 1e-6)

    for m in ("kks", "submersion"):
        sym = tri = inv = 0.0
        for n in (2, 3):
            sigma = core.random_spectrum(n, rng, min_gap=separated_gap(n))
            rs = [_rho(n, rng, sigma) for _ in range(3)]
            d = lambda a, b: qsl.geodesic_distance(a, b, m, starts=3)  # noqa: E731
            d01, d10, d12, d02 = d(rs[0], rs[1]), d(rs[1], rs[0]), d(rs[1], rs[2]), d(rs[0], rs[2])
            w = core.haar_unitary(n, rng)
            rw = [core.density_from_frame(w @ r.frame, sigma) for r in rs[:2]]
            sym, tri = max(sym, abs(d01 - d10)), max(tri, d02 - d01 - d12)
            inv = max(inv, abs(d(rw[0], rw[1]) - d01))
        c.le(f"{m} symmetry", sym, 1e-6)
        c.le(f"{m} triangle excess", max(tri, 0.0), 1e-5)
        c.le(f"{m} unitary invariance", inv, 1e-6)

    arc = 0.0
    for n in (2, 3, 4):
        pure = core.random_spectrum(n, rng, rank=1)
        for _ in range(3):
            u0, u1 = core.haar_unitary(n, rng), core.haar_unitary(n, rng)
            r0, r1 = core.density_from_frame(u0, pure), core.density_from_frame(u1, pure)
            for m in ("kks", "submersion"):
                arc = max(arc, abs(qsl.geodesic_distance(r0, r1, m, starts=3) - fubini_study(u0[:, 0], u1[:, 0])))
    c.le("pure distance vs arccos overlap", arc, 1e-6)
    return c


def criterion_7() -> Criterion:
    c = Criterion(7, "parallel Hamiltonian equality")
    rng = np.random.default_rng(7)
    gap = 0.0
    for n in (2, 3, 4, 6):
        pure = core.random_spectrum(n, rng, rank=1)
        for _ in range(20):
            rho = _rho(n, rng, pure)
            h = parallel_pure_hamiltonian(rho, rng)
            for m in ("kks", "submersion"):
                chk = qsl.metric_uncertainty_check(rho, h, m)
                if not chk.parallel:
                    gap = np.inf
                else:
                    gap = max(gap, chk.parallel_gap)
            gap = max(gap, abs(np.trace(h)))
    c.le("rank-one |hbar^2 g(X_H, X_H) - Delta H^2|", gap, 1e-9)
    held = total = 0
    for _ in range(60):
        n = int(rng.integers(2, 5))
        rho = _rho(n, rng, core.random_spectrum(n, rng))
        held += qsl.metric_uncertainty_check(rho, core.random_observable(n, rng), "kks").holds
        total += 1
    c.notes.append(f"logged: mixed-state hbar^2 g >= Delta H^2 held in {held}/{total} KKS samples")
    return c


def criterion_8() -> Criterion:
    c = Criterion(8, "CLI determinism and verify exit codes")
    cmd = [sys.executable, "-m", "orbitgeom.cli"]
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "cfg.json"
        cfg.write_text(json.dumps({"n": 3, "spectrum": [0.5, 0.3, 0.2], "hamiltonian": {"random": {"scale": 1.0}},
                                   "initial_frame": "haar", "seed": 11, "time": {"t_final": 2.0, "steps": 400}}))
        for fmt in ("csv", "json"):
            outs = []
            for k in range(2):
                out = Path(tmp) / f"{k}.{fmt}"
                proc = subprocess.run(cmd + ["run", "--config", str(cfg), "--format", fmt, "--out", str(out)],
                                      capture_output=True)
                c.true(f"run exit code ({fmt})", proc.returncode == 0, proc.returncode)
                outs.append(out.read_bytes() if out.exists() else b"")
            c.true(f"identical {fmt} bytes", outs[0] == outs[1] and len(outs[0]) > 0)
    for seed in (1, 42):
        proc = subprocess.run(cmd + ["verify", "--n", "2,3,4", "--seed", str(seed)], capture_output=True, text=True)
        c.true(f"verify seed {seed} exit code", proc.returncode == 0, proc.returncode)
        c.notes.append(f"seed {seed}: {proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else 'no output'}")
    return c


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 9)])
def test_criterion(criterion, capsys):
    c = criterion()
    with capsys.disabled():
        print("\n" + c.line())
    assert c.passed, c.line() + "\n" + c.details()


if __name__ == "__main__":
    results = [f() for f in CRITERIA]
    for r in results:
        print(r.line())
    sys.exit(0 if all(r.passed for r in results) else 1)
