import numpy as np
import pytest

from orbitgeom import connection as conn
from orbitgeom import core, dynamics, geometry as geo
from orbitgeom.errors import FiberMismatch, MissingFrames, NotALoop, NotTangent, ValidationError
from orbitgeom.verify import loop_hamiltonian
from oracles import SX, SZ, latitude_ket, pancharatnam_phase, slope, solid_angle_phase


def latitude_frame(theta):
    v = latitude_ket(theta)
    return np.column_stack([v, [-np.conj(v[1]), np.conj(v[0])]])


def latitude_loop(theta, values=(1.0, 0.0), steps=10_000):
    """Precession about z; the state returns after t = pi."""
    rho0 = core.density_from_frame(latitude_frame(theta), core.make_spectrum(list(values)))
    return dynamics.evolve(rho0, SZ, np.linspace(0, np.pi, steps + 1))


class TestMomentumAndInertia:
    def test_horizontal_zero(self, rng):
        sigma = core.make_spectrum([0.5, 0.3, 0.2])
        psi = core.haar_unitary(3, rng)
        x = psi @ geo.off_block_part(1j * core.random_observable(3, rng), sigma)
        for _ in range(5):
            xi = geo.block_part(1j * core.random_observable(3, rng), sigma)
            assert abs(conn.momentum_map(psi, x, xi, sigma)) <= 1e-14

    def test_vertical(self, rng):
        sigma = core.make_spectrum([0.5, 0.25], [1, 2])
        psi = core.haar_unitary(3, rng)
        xi0, xi = (geo.block_part(1j * core.random_observable(3, rng), sigma) for _ in range(2))
        assert conn.momentum_map(psi, psi @ xi0, xi, sigma) == pytest.approx(geo.inner(xi0, xi), abs=1e-12)

    def test_zero_xi(self, rng):
        sigma = core.make_spectrum([0.7, 0.3])
        psi = core.haar_unitary(2, rng)
        assert conn.momentum_map(psi, psi @ (1j * SX), np.zeros((2, 2)), sigma) == 0

    def test_not_tangent(self, rng):
        sigma = core.make_spectrum([0.7, 0.3])
        with pytest.raises(NotTangent):
            conn.momentum_map(np.eye(2), np.eye(2), np.diag([1j, 0]), sigma)

    def test_rejects_off_block_xi(self):
        sigma = core.make_spectrum([0.7, 0.3])
        with pytest.raises(ValidationError):
            conn.momentum_map(np.eye(2), 1j * SZ, 1j * SX, sigma)

    def test_inertia_value(self):
        sigma = core.make_spectrum([0.7, 0.3])
        xi = np.diag([1j, -1j])
        assert conn.locked_inertia(np.eye(2), xi, xi, sigma) == pytest.approx(1.0, abs=1e-15)

    def test_inertia_frame_independent(self, rng):
        sigma = core.make_spectrum([0.5, 0.25], [1, 2])
        xi, eta = (geo.block_part(1j * core.random_observable(3, rng), sigma) for _ in range(2))
        a = conn.locked_inertia(np.eye(3), xi, eta, sigma)
        for _ in range(5):
            assert abs(conn.locked_inertia(core.haar_unitary(3, rng), xi, eta, sigma) - a) <= 1e-12
        assert conn.locked_inertia(np.eye(3), xi, np.zeros((3, 3)), sigma) == 0

    def test_inertia_symmetric_invertible(self, rng):
        sigma = core.make_spectrum([0.5, 0.25], [1, 2])
        psi = core.haar_unitary(3, rng)
        basis = geo.stabilizer_basis(sigma)
        m = np.array([[conn.locked_inertia(psi, e, f, sigma) for f in basis] for e in basis])
        assert np.max(np.abs(m - m.T)) <= 1e-14
        assert np.linalg.eigvalsh(m)[0] > 0.5


class TestMechanicalConnection:
    @pytest.mark.parametrize("values,mults", [([0.7, 0.3], [1, 1]), ([0.5, 0.25], [1, 2]),
                                              ([0.4, 0.3, 0.2, 0.1], [1, 1, 1, 1]), ([1.0, 0.0], [1, 2])])
    def test_axioms(self, values, mults, rng):
        sigma = core.make_spectrum(values, mults)
        n = sigma.n
        for _ in range(10):
            psi = core.haar_unitary(n, rng)
            xi = geo.block_part(1j * core.random_observable(n, rng), sigma)
            x = psi @ (1j * core.random_observable(n, rng))
            assert core.fro(conn.mechanical_connection(psi, psi @ xi, sigma) - xi) <= 1e-10
            a = conn.mechanical_connection(psi, x, sigma)
            assert core.fro(a - conn.connection_form(psi, x, sigma)) <= 1e-12
            assert core.fro(conn.mechanical_connection(psi, x - psi @ a, sigma)) <= 1e-10
            v = core.random_stabilizer_unitary(sigma, rng)
            av = conn.mechanical_connection(psi @ v, x @ v, sigma)
            assert core.fro(av - core.dagger(v) @ a @ v) <= 1e-10
            hor = psi @ geo.off_block_part(1j * core.random_observable(n, rng), sigma)
            assert core.fro(conn.mechanical_connection(psi, hor, sigma)) <= 1e-12


class TestHorizontalLift:
    def test_parallel_generator_untouched(self):
        # at a pure state, an off-diagonal H keeps the trajectory horizontal for all t
        rho0 = core.pure_state([1, 0])
        traj = dynamics.evolve(rho0, SX, np.linspace(0, 2, 2001))
        lift = conn.horizontal_lift(traj, rho0.frame)
        assert max(core.fro(g - np.eye(2)) for g in lift.gauges) <= 1e-9
        for a, b in zip(lift.frames, traj.frames):
            assert core.fro(a - b) <= 1e-9

    def test_constant_trajectory(self, qubit_mixed):
        traj = dynamics.evolve(qubit_mixed, SZ, np.linspace(0, 1, 11))
        lift = conn.horizontal_lift(traj, qubit_mixed.frame)
        for f in lift.frames:
            assert core.fro(f - qubit_mixed.frame) <= 1e-14

    @pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 3, np.pi / 2, 2.0])
    def test_pancharatnam_endpoint(self, theta):
        traj = latitude_loop(theta)
        lift = conn.horizontal_lift(traj, traj.frames[0])
        end = lift.frames[-1][:, 0]
        start = traj.frames[0][:, 0]
        gamma = np.angle(np.vdot(start, end))
        kets = [s.frame[:, 0] for s in traj.states[:-1]]
        assert abs(conn.wrap_phase(gamma - pancharatnam_phase(kets))) <= 1e-6
        assert abs(abs(np.vdot(start, end)) - 1) <= 1e-9

    def test_projection_and_horizontality(self, rng):
        sigma = core.random_spectrum(3, rng, min_gap=0.1)
        rho0 = core.density_from_frame(core.haar_unitary(3, rng), sigma)
        traj = dynamics.evolve(rho0, loop_hamiltonian(3, rng), np.linspace(0, 2 * np.pi, 10_001))
        lift = conn.horizontal_lift(traj, rho0.frame)
        assert lift.max_residual <= 1e-7
        assert conn.check_projection(lift, traj) <= 1e-8
        for f in lift.frames[:: 1000]:
            assert core.fro(core.dagger(f) @ f - np.eye(3)) <= 1e-9

    def test_residual_second_order(self, rng):
        sigma = core.make_spectrum([0.5, 0.3, 0.2])
        rho0 = core.density_from_frame(core.haar_unitary(3, rng), sigma)
        h = loop_hamiltonian(3, rng)
        ns = [1000, 2000, 4000, 8000]
        res = [conn.horizontal_lift(dynamics.evolve(rho0, h, np.linspace(0, 2 * np.pi, m + 1)),
                                    rho0.frame).max_residual for m in ns]
        assert all(b < a for a, b in zip(res, res[1:]))
        assert slope(ns, res) == pytest.approx(2.0, abs=0.1)

    def test_time_dependent_endpoint_second_order(self, rng):
        sigma = core.make_spectrum([0.5, 0.25], [1, 2])
        rho0 = core.density_from_frame(core.haar_unitary(3, rng), sigma)
        h0, h1 = core.random_observable(3, rng), core.random_observable(3, rng)
        h = lambda t: h0 + np.sin(2 * t) * h1  # noqa: E731

        def endpoint(m):
            traj = dynamics.evolve(rho0, h, np.linspace(0, 1, m + 1))
            return conn.horizontal_lift(traj, rho0.frame).frames[-1]

        ref = endpoint(8192)
        ns = [32, 64, 128, 256]
        errs = [core.fro(endpoint(m) - ref) for m in ns]
        assert slope(ns, errs) == pytest.approx(2.0, abs=0.15)

    def test_fiber_mismatch(self, qubit_mixed):
        traj = dynamics.evolve(qubit_mixed, SX, np.linspace(0, 1, 11))
        with pytest.raises(FiberMismatch):
            conn.horizontal_lift(traj, core.haar_unitary(2, 3))

    def test_missing_frames(self, qubit_mixed):
        traj = dynamics.evolve(qubit_mixed, SX, np.linspace(0, 1, 11), record_frames=False)
        with pytest.raises(MissingFrames):
            conn.horizontal_lift(traj, qubit_mixed.frame)


class TestGeometricPhase:
    def test_constant_loop(self, qubit_mixed):
        traj = dynamics.evolve(qubit_mixed, SZ, np.linspace(0, 1, 11))
        assert conn.geometric_phase(traj, qubit_mixed.frame).phase == pytest.approx(0, abs=1e-14)

    @pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 3, np.pi / 2])
    def test_pure_latitude(self, theta):
        traj = latitude_loop(theta)
        res = conn.geometric_phase(traj, traj.frames[0])
        assert abs(conn.wrap_phase(res.phase - solid_angle_phase(theta))) <= 1e-5
        assert res.max_residual <= 1e-7
        assert -np.pi < res.phase <= np.pi

    @pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 3, np.pi / 2])
    def test_mixed_latitude(self, theta):
        traj = latitude_loop(theta, (0.7, 0.3))
        res = conn.geometric_phase(traj, traj.frames[0])
        disc = conn.discrete_holonomy(traj, traj.frames[0])
        assert abs(conn.wrap_phase(res.phase - disc.phase)) <= 1e-5
        # each eigenvector carries its own solid-angle phase; the antipode sees the opposite one
        g = -np.pi * (1 - np.cos(theta))
        closed = np.angle(0.7 * np.exp(1j * g) + 0.3 * np.exp(-1j * g))
        assert abs(conn.wrap_phase(res.phase - closed)) <= 1e-6

    def test_holonomy_in_stabilizer(self, rng):
        sigma = core.make_spectrum([0.5, 0.25], [1, 2])
        rho0 = core.density_from_frame(core.haar_unitary(3, rng), sigma)
        traj = dynamics.evolve(rho0, loop_hamiltonian(3, rng), np.linspace(0, 2 * np.pi, 10_001))
        res = conn.geometric_phase(traj, rho0.frame)
        assert core.fro(geo.off_block_part(res.holonomy, sigma)) <= 1e-8
        assert core.fro(res.holonomy @ core.dagger(res.holonomy) - np.eye(3)) <= 1e-9
        d = sigma.expanded
        assert abs(np.trace(np.diag(d) @ res.holonomy) - res.trace) <= 1e-12

    @pytest.mark.parametrize("values,mults", [([0.7, 0.3], [1, 1]), ([0.5, 0.25], [1, 2]), ([0.5, 0.3, 0.2], [1, 1, 1])])
    def test_gauge_invariance(self, values, mults, rng):
        sigma = core.make_spectrum(values, mults)
        n = sigma.n
        rho0 = core.density_from_frame(core.haar_unitary(n, rng), sigma)
        traj = dynamics.evolve(rho0, loop_hamiltonian(n, rng), np.linspace(0, 2 * np.pi, 4001))
        ref = conn.geometric_phase(traj, rho0.frame).phase
        for _ in range(50):
            v = core.random_stabilizer_unitary(sigma, rng)
            assert abs(conn.wrap_phase(conn.geometric_phase(traj, rho0.frame @ v).phase - ref)) <= 1e-7

    def test_step_convergence(self, rng):
        sigma = core.make_spectrum([0.5, 0.3, 0.2])
        rho0 = core.density_from_frame(core.haar_unitary(3, rng), sigma)
        h = loop_hamiltonian(3, rng)
        ph = {m: conn.geometric_phase(dynamics.evolve(rho0, h, np.linspace(0, 2 * np.pi, m + 1)),
                                      rho0.frame).phase for m in (500, 1000, 2000, 4000)}
        for m in (500, 1000, 2000):
            assert abs(conn.wrap_phase(ph[m] - ph[2 * m])) <= 1.0 / m ** 2

    def test_discrete_matches_random_loop(self, rng):
        for n in (2, 3, 4):
            sigma = core.random_spectrum(n, rng, min_gap=0.05)
            rho0 = core.density_from_frame(core.haar_unitary(n, rng), sigma)
            traj = dynamics.evolve(rho0, loop_hamiltonian(n, rng), np.linspace(0, 2 * np.pi, 10_001))
            a, b = conn.geometric_phase(traj, rho0.frame), conn.discrete_holonomy(traj, rho0.frame)
            assert abs(conn.wrap_phase(a.phase - b.phase)) <= 1e-5

    def test_not_a_loop(self, qubit_mixed):
        traj = dynamics.evolve(qubit_mixed, SX, np.linspace(0, 1, 11))
        with pytest.raises(NotALoop):
            conn.geometric_phase(traj, qubit_mixed.frame)

    def test_wrap_phase(self):
        assert conn.wrap_phase(np.pi) == np.pi
        assert conn.wrap_phase(-np.pi) == np.pi
        assert conn.wrap_phase(3 * np.pi / 2) == pytest.approx(-np.pi / 2)


def test_oracles_agree():
    for theta in (np.pi / 6, np.pi / 3, 2.5):
        kets = [latitude_ket(theta, phi) for phi in np.linspace(0, 2 * np.pi, 20_000, endpoint=False)]
        assert abs(conn.wrap_phase(pancharatnam_phase(kets) - solid_angle_phase(theta))) <= 1e-6
