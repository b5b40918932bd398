"""Experiment configuration: strict JSON parsing and validation.

A configuration is one JSON object::

    {
      "n": 2,
      "spectrum": {"values": [1, 0], "multiplicities": [1, 1]},
      "hamiltonian": "pauli-z",
      "time": {"t_final": 3.1415926, "steps": 1000},
      "task": "evolve"
    }

Optional keys: ``hbar`` (1.0), ``metric`` ("kks"), ``seed`` (0),
``initial_frame`` ("identity"), ``target`` (none), ``geodesic``
(``starts``, ``max_iter``) and ``verify`` (``dims``). Unknown keys are
rejected.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import PAULI_X, PAULI_Y, PAULI_Z, Spectrum, as_observable, as_unitary, haar_unitary, make_spectrum, random_observable
from .errors import OrbitGeomError, ParseError, UnknownKey, ValidationError

TASKS = ("evolve", "phase", "qsl", "distance", "orbit-info", "verify")
METRICS = ("kks", "submersion")
PRESETS = {"pauli-x": PAULI_X, "pauli-y": PAULI_Y, "pauli-z": PAULI_Z}
FRAME_NAMES = ("identity", "haar")

_TOP = {"n", "spectrum", "hamiltonian", "time", "hbar", "metric", "seed", "task",
        "initial_frame", "target", "geodesic", "verify"}
_DEFAULTS = {
    "hbar": 1.0,
    "metric": "kks",
    "seed": 0,
    "task": "evolve",
    "time": {"t_final": 1.0, "steps": 1000},
    "initial_frame": "identity",
    "target": None,
    "geodesic": {"starts": 8, "max_iter": 500},
    "verify": {"dims": [2, 3, 4]},
}


def _reject_unknown(obj: dict, allowed: set, path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise UnknownKey(key, path)


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ValidationError(f"missing required key {key!r} in {path}", field=f"{path}.{key}".lstrip("."))
    return obj[key]


def _int(v, name: str, minimum: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{name} must be an integer", field=name)
    if minimum is not None and v < minimum:
        raise ValidationError(f"{name} must be >= {minimum}", field=name)
    return v


def _real(v, name: str, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ValidationError(f"{name} must be a finite number", field=name)
    if positive and v <= 0:
        raise ValidationError(f"{name} must be positive", field=name)
    return float(v)


def _matrix(obj, name: str, n: int) -> np.ndarray:
    if not isinstance(obj, dict):
        raise ValidationError(f"{name} must be an object with 'real' and 'imag'", field=name)
    _reject_unknown(obj, {"real", "imag"}, name)
    try:
        re = np.array(_require(obj, "real", name), dtype=float)
        im = np.array(obj.get("imag", np.zeros_like(re)), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} entries must be numbers: {exc}", field=name) from None
    if re.shape != (n, n) or im.shape != (n, n):
        raise ValidationError(f"{name} must be {n}x{n}", field=name)
    return re + 1j * im


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated configuration; ``raw`` is the normalized document (defaults filled)."""

    n: int
    spectrum: Spectrum
    hamiltonian: np.ndarray = field(repr=False)
    t_final: float
    steps: int
    hbar: float
    metric: str
    seed: int
    task: str
    initial_frame: np.ndarray = field(repr=False)
    target: np.ndarray | None = field(repr=False)
    starts: int
    max_iter: int
    verify_dims: tuple[int, ...]
    raw: dict = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.steps + 1)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        raw["seed"] = seed
        return validate_config(raw)


def _frame(spec, name: str, n: int, seed: int) -> np.ndarray:
    if isinstance(spec, str):
        if spec == "identity":
            return np.eye(n, dtype=complex)
        if spec == "haar":
            return haar_unitary(n, seed)
        raise ValidationError(f"{name} must be one of {FRAME_NAMES} or a matrix", field=name)
    try:
        return as_unitary(_matrix(spec, name, n), name)
    except OrbitGeomError as exc:
        raise ValidationError(str(exc), field=name) from None


def _hamiltonian(spec, n: int, seed: int) -> np.ndarray:
    name = "hamiltonian"
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ValidationError(f"unknown preset {spec!r}; presets: {sorted(PRESETS)}", field=name)
        if n != 2:
            raise ValidationError("Pauli presets are defined for n=2 only", field=name)
        return PRESETS[spec].copy()
    if isinstance(spec, dict) and "random" in spec:
        _reject_unknown(spec, {"random"}, name)
        r = spec["random"]
        if not isinstance(r, dict):
            raise ValidationError("hamiltonian.random must be an object", field="hamiltonian.random")
        _reject_unknown(r, {"seed", "scale"}, "hamiltonian.random")
        rs = _int(r.get("seed", seed), "hamiltonian.random.seed")
        scale = _real(r.get("scale", 1.0), "hamiltonian.random.scale", positive=True)
        return random_observable(n, rs, scale)
    m = _matrix(spec, name, n)
    try:
        return as_observable(m, name)
    except OrbitGeomError as exc:
        raise ValidationError(str(exc), field=name) from None


def validate_config(doc: Any) -> ExperimentConfig:
    """Validate a decoded JSON document and fill defaults.

    Raises:
        UnknownKey: a key outside the schema.
        ValidationError: an invariant fails; ``field`` names the offending key.
    """
    if not isinstance(doc, dict):
        raise ValidationError("configuration must be a JSON object", field="")
    _reject_unknown(doc, _TOP, "config")
    raw = copy.deepcopy(_DEFAULTS)
    for key, val in doc.items():
        if isinstance(val, dict) and isinstance(raw.get(key), dict):
            sub_allowed = set(raw[key])
            _reject_unknown(val, sub_allowed, key)
            raw[key].update(copy.deepcopy(val))
        else:
            raw[key] = copy.deepcopy(val)

    n = _int(_require(raw, "n", ""), "n", minimum=1)
    spec = _require(raw, "spectrum", "")
    if isinstance(spec, list):
        spec = {"values": spec}
    if not isinstance(spec, dict):
        raise ValidationError("spectrum must be a list or an object", field="spectrum")
    _reject_unknown(spec, {"values", "multiplicities"}, "spectrum")
    try:
        sigma = make_spectrum(_require(spec, "values", "spectrum"), spec.get("multiplicities"))
    except (OrbitGeomError, TypeError, ValueError) as exc:
        raise ValidationError(f"invalid spectrum: {exc}", field="spectrum") from None
    if sigma.n != n:
        raise ValidationError(f"spectrum has dimension {sigma.n}, n is {n}", field="spectrum")
    raw["spectrum"] = spec

    task = raw["task"]
    if task not in TASKS:
        raise ValidationError(f"task must be one of {TASKS}", field="task")
    metric = raw["metric"]
    if metric not in METRICS:
        raise ValidationError(f"metric must be one of {METRICS}", field="metric")
    seed = _int(raw["seed"], "seed")
    hbar = _real(raw["hbar"], "hbar", positive=True)
    t_final = _real(raw["time"]["t_final"], "time.t_final", positive=True)
    steps = _int(raw["time"]["steps"], "time.steps", minimum=1)
    starts = _int(raw["geodesic"]["starts"], "geodesic.starts", minimum=1)
    max_iter = _int(raw["geodesic"]["max_iter"], "geodesic.max_iter", minimum=1)
    dims = raw["verify"]["dims"]
    if not isinstance(dims, list) or not dims:
        raise ValidationError("verify.dims must be a nonempty list", field="verify.dims")
    dims = tuple(_int(d, "verify.dims", minimum=1) for d in dims)

    if task == "verify":
        h = np.zeros((n, n), dtype=complex) if "hamiltonian" not in raw else _hamiltonian(raw["hamiltonian"], n, seed)
    else:
        h = _hamiltonian(_require(raw, "hamiltonian", ""), n, seed)
    frame = _frame(raw["initial_frame"], "initial_frame", n, seed)
    target = None if raw["target"] is None else _frame(raw["target"], "target", n, seed + 1)

    return ExperimentConfig(n, sigma, h, t_final, steps, hbar, metric, seed, task, frame, target,
                            starts, max_iter, dims, raw)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises:
        ParseError: malformed JSON, with line and column.
        UnknownKey, ValidationError
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return validate_config(doc)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
