"""Task dispatch, run records and CSV/JSON emission."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .connection import discrete_holonomy, geometric_phase
from .core import density_from_frame, expectation
from .dynamics import Trajectory, evolve
from .errors import IoError, OrbitGeomError
from .geometry import gram_matrix, kks_metric, orbit_dimension, numerical_orbit_dimension, symplectic_form
from .qsl import calibrated_metric, dispersion_series, find_geodesic, qsl_report
from .verify import verify

log = logging.getLogger(__name__)

SCHEMA = 1
TOLERANCES = {
    "isospectral": 1e-9,
    "loop": 1e-8,
    "horizontality": 1e-7,
    "geodesic_endpoint": 1e-9,
    "saturation_slack": 1e-6,
}

STATUS_OK = "ok"
STATUS_NUMERICAL = "numerical-failure"


@dataclass(eq=True)
class RunRecord:
    """Result of one run.

    ``series`` maps column names to per-sample values. ``wall_time`` is
    informational: it is neither compared nor serialized, which keeps
    emitted files byte-identical across runs.
    """

    config: dict
    task: str
    outputs: dict
    series: dict | None = None
    status: str = STATUS_OK
    version: str = __version__
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCES))
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "version": self.version,
            "task": self.task,
            "status": self.status,
            "config": self.config,
            "tolerances": self.tolerances,
            "outputs": self.outputs,
            "series": self.series,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(d["config"], d["task"], d["outputs"], d.get("series"), d["status"],
                   d["version"], d["tolerances"])

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def plain(obj):
    """Replace numpy scalars and arrays by built-in JSON types, recursively."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _cmat(m: np.ndarray) -> dict:
    return {"real": np.real(m).tolist(), "imag": np.imag(m).tolist()}


def state_columns(n: int) -> list[str]:
    return [f"{part}_{i}{j}" for i in range(n) for j in range(n) for part in ("re", "im")]


def _series(traj: Trajectory) -> dict:
    n = traj.spectrum.n
    rows = np.array([s.matrix.ravel() for s in traj.states])
    cols = {"t": traj.times.tolist()}
    for k, name in enumerate(state_columns(n)):
        entry = rows[:, k // 2]
        cols[name] = (entry.real if name.startswith("re") else entry.imag).tolist()
    cols["energy"] = [expectation(s, traj.hamiltonian_at(t)) for s, t in zip(traj.states, traj.times)]
    cols["delta_h"] = dispersion_series(traj).tolist()
    return cols


def _trajectory(cfg: ExperimentConfig) -> Trajectory:
    rho0 = density_from_frame(cfg.initial_frame, cfg.spectrum)
    return evolve(rho0, cfg.hamiltonian, cfg.times, hbar=cfg.hbar)


def _evolve(cfg):
    traj = _trajectory(cfg)
    ser = _series(traj)
    p = cfg.spectrum.expanded
    drift = max(float(np.max(np.abs(np.sort(np.linalg.eigvalsh(s.matrix))[::-1] - p))) for s in traj.states)
    out = {
        "final_state": _cmat(traj.states[-1].matrix),
        "energy_initial": ser["energy"][0],
        "energy_drift": float(np.ptp(ser["energy"])),
        "delta_h_initial": ser["delta_h"][0],
        "delta_h_drift": float(np.ptp(ser["delta_h"])),
        "isospectral_drift": drift,
    }
    return out, ser, STATUS_OK


def _phase(cfg):
    traj = _trajectory(cfg)
    psi0 = traj.frames[0]
    hol = geometric_phase(traj, psi0)
    disc = discrete_holonomy(traj, psi0)
    out = {
        "phase": hol.phase,
        "trace": {"real": hol.trace.real, "imag": hol.trace.imag},
        "holonomy": _cmat(hol.holonomy),
        "max_residual": hol.max_residual,
        "discrete_phase": disc.phase,
    }
    status = STATUS_OK if hol.max_residual <= TOLERANCES["horizontality"] else STATUS_NUMERICAL
    return out, _series(traj), status


def _qsl(cfg):
    traj = _trajectory(cfg)
    rep = qsl_report(traj, cfg.metric, starts=cfg.starts, max_iter=cfg.max_iter, seed=cfg.seed)
    out = rep.to_dict()
    out["dispersion_integral"] = rep.delta_e * rep.tau_actual / cfg.hbar
    status = STATUS_OK if rep.converged and rep.holds else STATUS_NUMERICAL
    return out, _series(traj), status


def _distance(cfg):
    rho0 = density_from_frame(cfg.initial_frame, cfg.spectrum)
    if cfg.target is not None:
        rho1 = density_from_frame(cfg.target, cfg.spectrum)
    else:
        rho1 = _trajectory(cfg).states[-1]
    res = find_geodesic(rho0, rho1, cfg.metric, starts=cfg.starts, max_iter=cfg.max_iter, seed=cfg.seed)
    out = {
        "distance": res.distance,
        "converged": res.converged,
        "metric": res.metric.value,
        "endpoint_error": res.endpoint_error,
        "starts_converged": res.starts_converged,
    }
    return out, None, STATUS_OK if res.converged else STATUS_NUMERICAL


def _orbit_info(cfg):
    sigma = cfg.spectrum
    rho = density_from_frame(cfg.initial_frame, sigma)
    out = {
        "dimension": orbit_dimension(sigma),
        "numerical_dimension": numerical_orbit_dimension(rho),
        "stabilizer_blocks": list(sigma.multiplicities),
        "stabilizer_dimension": sum(m * m for m in sigma.multiplicities),
        "spectrum": sigma.to_dict(),
    }
    if out["dimension"] > 0:
        g = gram_matrix(rho, lambda u, v: kks_metric(rho, u, v, cfg.hbar))
        om = gram_matrix(rho, lambda u, v: symplectic_form(u, v, cfg.hbar))
        kks = gram_matrix(rho, lambda u, v: calibrated_metric(u, v, "kks", cfg.hbar))
        sub = gram_matrix(rho, lambda u, v: calibrated_metric(u, v, "submersion", cfg.hbar))
        # generalized eigenvalues of the calibrated pair give the metric ratio range
        ratio = np.linalg.eigvals(np.linalg.solve(sub, kks)).real
        out.update({
            "metric_gram_condition": float(np.linalg.cond(g)),
            "omega_gram_condition": float(np.linalg.cond(om)),
            "kks_to_submersion_ratio": [float(ratio.min()), float(ratio.max())],
        })
    return out, None, STATUS_OK


def _verify(cfg):
    rep = verify(cfg.verify_dims, cfg.seed, min(cfg.starts, 3))
    out = {"passed": rep.passed, "checks": [c.to_dict() for c in rep.checks]}
    return out, None, STATUS_OK if rep.passed else STATUS_NUMERICAL


_TASKS = {
    "evolve": _evolve,
    "phase": _phase,
    "qsl": _qsl,
    "distance": _distance,
    "orbit-info": _orbit_info,
    "verify": _verify,
}


class TaskError(OrbitGeomError):
    """A library error raised inside a task, with the task name attached."""

    def __init__(self, task: str, cause: OrbitGeomError):
        super().__init__(f"task {task!r} failed: {type(cause).__name__}: {cause}")
        self.task = task
        self.cause = cause


def run(cfg: ExperimentConfig) -> RunRecord:
    """Execute the configured task.

    Raises:
        TaskError: wraps any library error with the task name.
    """
    t0 = time.perf_counter()
    try:
        out, ser, status = _TASKS[cfg.task](cfg)
    except OrbitGeomError as exc:
        raise TaskError(cfg.task, exc) from exc
    rec = RunRecord(plain(cfg.raw), cfg.task, plain(out), plain(ser), status,
                    wall_time=time.perf_counter() - t0)
    log.info("task %s finished in %.3f s with status %s", cfg.task, rec.wall_time, status)
    return rec


def _flatten(prefix: str, value, rows: list) -> None:
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else k, value[k], rows)
    elif isinstance(value, list) and value and isinstance(value[0], (dict, list)):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, json.dumps(value)))


def to_csv(record: RunRecord) -> str:
    """CSV text: a ``#schema=1`` comment, a header row, then data rows.

    Records with a time series get one row per sample (``t``, real and
    imaginary parts of each state entry in row-major order, ``energy``,
    ``delta_h``); others get ``key,value`` rows of the flattened outputs.
    """
    buf = io.StringIO()
    buf.write(f"#schema={SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    if record.series:
        cols = list(record.series)
        w.writerow(cols)
        for row in zip(*(record.series[c] for c in cols)):
            w.writerow([repr(float(x)) for x in row])
    else:
        rows: list = []
        _flatten("", record.outputs, rows)
        w.writerow(["key", "value"])
        w.writerows(rows)
    return buf.getvalue()


def emit(record: RunRecord, fmt: str = "json", path=None) -> str:
    """Serialize a record; write it to ``path`` when given.

    Raises:
        ValueError: unknown format.
        IoError: the file cannot be written.
    """
    if fmt == "json":
        text = record.to_json()
    elif fmt == "csv":
        text = to_csv(record)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
    return text

