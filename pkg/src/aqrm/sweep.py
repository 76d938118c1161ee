"""Coupling and temperature sweeps with deterministic parallel execution.

A sweep fixes the ratio ``lambda_other / lambda_swept`` and walks the
swept coupling over a grid, optionally for several ratios and
temperatures.  Each grid point is independent; failures become flagged
rows instead of aborting the run.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dissipator as dis
from . import formats
from . import quantifiers as qf
from .spectrum import ModelParams, production_cutoff, solve, spectrum_table

MODES = ("spectrum", "quantify_1d", "quantify_2d")
SWEPT = ("lambda1", "lambda2")
STATES = ("gibbs", "steady")
CUTOFF_STEP = 8
CUTOFF_CEILING = 160
WORKERS_ENV = "AQRM_WORKERS"

DEFAULT_COUPLING_GRID = {"start": 0.0, "stop": 4.0, "points": 201}
DEFAULT_TEMPERATURE_GRID = {"start": 0.02, "stop": 0.5, "points": 49}


def _grid(obj, name: str) -> np.ndarray:
    if isinstance(obj, dict):
        try:
            points = int(obj["points"])
            grid = np.linspace(float(obj["start"]), float(obj["stop"]), points)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{name}: expected {{start, stop, points}}, got {obj!r} ({exc})") from None
    else:
        grid = np.atleast_1d(np.asarray(obj, dtype=float))
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError(f"{name} must be a non-empty 1D grid")
    if not np.all(np.isfinite(grid)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(np.diff(grid) <= 0):
        raise ValueError(f"{name} must be strictly ascending")
    return grid


@dataclass(frozen=True)
class SweepSpec:
    """What to compute on which grid.

    ``ratios`` holds one or more values of ``lambda_other / lambda_swept``;
    ``pairs`` replaces the ratio parameterisation by explicit
    ``(lambda1, lambda2)`` points.  ``cutoff`` is ``"auto"`` (production
    rule per point), ``"converge"`` (escalate per point) or an integer.
    """

    mode: str = "quantify_1d"
    swept: str = "lambda1"
    ratios: tuple = (0.0,)
    coupling_grid: np.ndarray = field(default_factory=lambda: _grid(DEFAULT_COUPLING_GRID, "coupling_grid"))
    temperature_grid: np.ndarray = field(default_factory=lambda: np.array([0.1]))
    model: ModelParams = field(default_factory=ModelParams)
    bath: dis.BathParams = field(default_factory=dis.BathParams)
    quantifiers: tuple = qf.QUANTIFIERS
    pairs: tuple | None = None
    cutoff: str | int = "auto"
    levels: int = 6
    state: str = "gibbs"
    seed: int = 0
    converge_quantifier: str = "negativity"
    rel_tol: float = 1e-6

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.swept not in SWEPT:
            raise ValueError(f"swept must be one of {SWEPT}, got {self.swept!r}")
        if self.state not in STATES:
            raise ValueError(f"state must be one of {STATES}, got {self.state!r}")
        ratios = tuple(float(r) for r in np.atleast_1d(self.ratios))
        if not ratios or any(not 0.0 <= r <= 1.0 for r in ratios):
            raise ValueError(f"ratios must be non-empty and within [0, 1], got {ratios}")
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "coupling_grid", _grid(self.coupling_grid, "coupling_grid"))
        object.__setattr__(self, "temperature_grid", _grid(self.temperature_grid, "temperature_grid"))
        if self.mode != "spectrum" and np.any(self.temperature_grid <= 0):
            raise ValueError("temperatures must be positive for quantify modes")
        if self.mode == "quantify_1d" and self.temperature_grid.size != 1:
            raise ValueError("quantify_1d takes exactly one temperature; use quantify_2d for a T grid")
        if self.pairs is not None:
            pairs = tuple((float(a), float(b)) for a, b in self.pairs)
            if not pairs or any(a < 0 or b < 0 for a, b in pairs):
                raise ValueError("pairs must be a non-empty list of non-negative (lambda1, lambda2)")
            if self.mode == "spectrum":
                raise ValueError("spectrum mode needs a ratio parameterisation, not explicit pairs")
            object.__setattr__(self, "pairs", pairs)
        unknown = set(self.quantifiers) - set(qf.QUANTIFIERS)
        if unknown:
            raise ValueError(f"unknown quantifiers {sorted(unknown)}")
        object.__setattr__(self, "quantifiers", tuple(self.quantifiers))
        if self.cutoff not in ("auto", "converge"):
            if isinstance(self.cutoff, bool) or int(self.cutoff) != self.cutoff or self.cutoff < 2:
                raise ValueError(f"cutoff must be 'auto', 'converge' or an integer >= 2, got {self.cutoff!r}")
            object.__setattr__(self, "cutoff", int(self.cutoff))
        if self.converge_quantifier not in qf.QUANTIFIERS:
            raise ValueError(f"unknown converge_quantifier {self.converge_quantifier!r}")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")

    @classmethod
    def from_dict(cls, obj: dict) -> "SweepSpec":
        if not isinstance(obj, dict):
            raise ValueError("sweep spec must be a JSON object")
        known = {
            "mode", "swept", "ratio", "ratios", "coupling_grid", "temperature_grid", "temperature",
            "model", "bath", "quantifiers", "pairs", "cutoff", "levels", "state", "seed",
            "converge_quantifier", "rel_tol", "name", "description",
        }
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown sweep spec fields {sorted(unknown)}")
        kw = {k: obj[k] for k in ("mode", "pairs", "cutoff", "levels", "state", "seed",
                                  "converge_quantifier", "rel_tol") if k in obj}
        if "swept" in obj:
            kw["swept"] = {"l1": "lambda1", "l2": "lambda2"}.get(obj["swept"], obj["swept"])
        if "ratio" in obj or "ratios" in obj:
            kw["ratios"] = obj.get("ratios", obj.get("ratio"))
        if "coupling_grid" in obj:
            kw["coupling_grid"] = obj["coupling_grid"]
        if "temperature_grid" in obj:
            kw["temperature_grid"] = obj["temperature_grid"]
        elif "temperature" in obj:
            kw["temperature_grid"] = [obj["temperature"]]
        elif obj.get("mode") == "quantify_2d":
            kw["temperature_grid"] = DEFAULT_TEMPERATURE_GRID
        if "model" in obj:
            kw["model"] = ModelParams(**obj["model"])
        if "bath" in obj:
            kw["bath"] = dis.BathParams(**obj["bath"])
        if "quantifiers" in obj:
            kw["quantifiers"] = tuple(obj["quantifiers"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ValueError(f"invalid sweep spec: {exc}") from None

    @classmethod
    def load(cls, path) -> "SweepSpec":
        with open(path) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON: {exc}") from None
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        """Canonical JSON-ready form; ``from_dict(to_dict())`` round-trips."""
        return {
            "mode": self.mode,
            "swept": self.swept,
            "ratios": list(self.ratios),
            "coupling_grid": self.coupling_grid.tolist(),
            "temperature_grid": self.temperature_grid.tolist(),
            "model": asdict(self.model),
            "bath": asdict(self.bath),
            "quantifiers": list(self.quantifiers),
            "pairs": None if self.pairs is None else [list(p) for p in self.pairs],
            "cutoff": self.cutoff,
            "levels": self.levels,
            "state": self.state,
            "seed": self.seed,
            "converge_quantifier": self.converge_quantifier,
            "rel_tol": self.rel_tol,
        }

    def points(self) -> list[tuple[float, float, float]]:
        """``(lambda1, lambda2, T)`` in output order: ratio, then T, then coupling."""
        out = []
        if self.pairs is not None:
            for T in self.temperature_grid:
                out += [(l1, l2, float(T)) for l1, l2 in self.pairs]
            return out
        for ratio in self.ratios:
            for T in self.temperature_grid:
                for lam in self.coupling_grid:
                    p = self.model.with_coupling(float(lam), self.swept, ratio)
                    out.append((p.lambda1, p.lambda2, float(T)))
        return out


@dataclass(frozen=True)
class ConvergenceResult:
    cutoff: int
    value: float | None
    next_value: float | None
    converged: bool
    history: tuple = ()


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list = field(default_factory=list)
    spectra: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def failed(self) -> int:
        return sum(1 for r in self.rows if any(f.startswith("failed") for f in r["flags"]))

    def csv(self) -> str:
        return formats.report_csv(self.rows)

    def provenance(self) -> dict:
        return formats.provenance(
            self.spec.to_dict(),
            [r["fock_cutoff"] for r in self.rows] + [t.fock_cutoff for _, t in self.spectra],
            self.wall_time,
            {
                "schema": formats.SPECTRUM_SCHEMA if self.spec.mode == "spectrum" else formats.REPORT_SCHEMA,
                "rows": len(self.rows) if self.rows else sum(t.couplings.size for _, t in self.spectra),
                "failed_rows": self.failed,
            },
        )


def _state(params: ModelParams, T: float, state: str, bath: dis.BathParams):
    s = solve(params)
    if state == "gibbs":
        return s, dis.gibbs_state(s, T)
    gen = dis.build_generator(s, replace(bath, T_boson=T, T_qubit=T))
    return s, dis.steady_state(gen)


def evaluate_point(
    params: ModelParams,
    T: float,
    quantifiers=qf.QUANTIFIERS,
    seed: int = 0,
    state: str = "gibbs",
    bath: dis.BathParams | None = None,
) -> qf.QuantifierReport:
    """Quantifier report of the equilibrium state at one parameter point."""
    s, rho = _state(params, T, state, bath or dis.BathParams())
    rep = qf.evaluate(rho, s, quantifiers, discord_options={"seed": seed})
    rep.convergence["fock_cutoff"] = s.config.fock_cutoff
    rep.convergence["state"] = state
    return rep


def _single_value(params, T, quantifier, seed, state, bath):
    rep = evaluate_point(params, T, (quantifier,), seed, state, bath)
    return getattr(rep, quantifier), rep


def converge_cutoff(
    params: ModelParams,
    T: float,
    quantifier: str = "negativity",
    rel_tol: float = 1e-6,
    step: int = CUTOFF_STEP,
    ceiling: int = CUTOFF_CEILING,
    seed: int = 0,
    state: str = "gibbs",
    bath: dis.BathParams | None = None,
) -> ConvergenceResult:
    """Smallest cutoff, from the rule-based start in steps of ``step``, that is stable.

    Stable means the quantifier changes by less than ``rel_tol`` (relative)
    when the cutoff grows by ``step``.  ``converged`` is false when the
    ceiling is hit first.
    """
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    if quantifier not in qf.QUANTIFIERS:
        raise ValueError(f"unknown quantifier {quantifier!r}")
    start = params.hilbert.fock_cutoff
    value, _ = _single_value(params.with_cutoff(start), T, quantifier, seed, state, bath)
    if math.isinf(rel_tol):
        return ConvergenceResult(start, value, None, True, ((start, value),))
    history = [(start, value)]
    n = start
    while n + step <= ceiling:
        nxt, _ = _single_value(params.with_cutoff(n + step), T, quantifier, seed, state, bath)
        history.append((n + step, nxt))
        if value is not None and nxt is not None:
            if abs(nxt - value) <= rel_tol * max(abs(value), abs(nxt)) + 1e-15:
                return ConvergenceResult(n, value, nxt, True, tuple(history))
        elif value is None and nxt is None:
            return ConvergenceResult(n, value, nxt, True, tuple(history))
        n, value = n + step, nxt
    return ConvergenceResult(n, value, None, False, tuple(history))


def _run_point(task) -> dict:
    l1, l2, T, spec = task
    params = replace(spec.model, lambda1=l1, lambda2=l2)
    try:
        if spec.cutoff == "converge":
            conv = converge_cutoff(params, T, spec.converge_quantifier, spec.rel_tol,
                                   seed=spec.seed, state=spec.state, bath=spec.bath)
            params = params.with_cutoff(conv.cutoff)
        elif spec.cutoff != "auto":
            params = params.with_cutoff(spec.cutoff)
        rep = evaluate_point(params, T, spec.quantifiers, spec.seed, spec.state, spec.bath)
        if spec.cutoff == "converge" and not conv.converged:
            rep.flags.append("cutoff_ceiling")
        return formats.report_row(l1, l2, T, rep)
    except Exception as exc:  # per-point failures are data
        row = formats.report_row(l1, l2, T, None, params.fock_cutoff or production_cutoff(params.lambda_max, params.omega))
        row["flags"] = [f"failed:{type(exc).__name__}"]
        return row


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Evaluate every grid point; row order depends only on ``spec``."""
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    t0 = time.perf_counter()
    result = SweepResult(spec)
    if spec.mode == "spectrum":
        for ratio in spec.ratios:
            params = spec.model if spec.cutoff in ("auto", "converge") else spec.model.with_cutoff(spec.cutoff)
            table = spectrum_table(params, spec.coupling_grid, spec.levels, spec.swept, ratio)
            result.spectra.append((ratio, table))
    else:
        tasks = [(l1, l2, T, spec) for l1, l2, T in spec.points()]
        if workers == 1 or len(tasks) < 2:
            result.rows = [_run_point(t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                result.rows = list(pool.map(_run_point, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    result.wall_time = time.perf_counter() - t0
    return result


def sidecar_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".provenance.json")


def write_outputs(result: SweepResult, out) -> tuple[Path, Path]:
    """Write the CSV (spectrum or report) and its JSON provenance sidecar."""
    out = Path(out)
    with open(out, "w", newline="") as fh:
        if result.spec.mode == "spectrum":
            formats.write_spectrum_csv(result.spectra, result.spec.model, result.spec.swept, fh)
        else:
            formats.write_report_csv(result.rows, fh)
    side = sidecar_path(out)
    with open(side, "w") as fh:
        json.dump(result.provenance(), fh, indent=2)
    return out, side

