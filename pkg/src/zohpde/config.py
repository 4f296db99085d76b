"""Flat key-value run configuration: parsing, validation, builders.

Format: one ``key = value`` per line, ``#`` comments, blank lines ignored.
Keys are dotted (``problem.p``, ``schedule.T``, ...); bare problem keys
(``p``, ``q``, ``n_max``, ...) are accepted for plain problem-definition
files.  Coefficients are constants or ``table:PATH`` pointing at a
two-column ``z,value`` CSV.

Sign convention of the file format: ``q`` is the growth-form reaction
coefficient, i.e. the PDE reads  r dx/dt = (p x')' + q x,  so for the
constant Dirichlet problem lambda_n = n^2 pi^2 p - q.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .modal_sim import SamplingSchedule, make_schedule
from .quadrature import sine_reconstruct
from .sl_operator import Coefficient, EigenSystem, SLProblem, analytic_eigensystem, shoot_eigensystem

__all__ = ["UsageError", "RunConfig", "parse_config", "load_config"]


class UsageError(Exception):
    """Malformed or incomplete configuration (CLI exit code 64)."""


_KNOWN_PREFIXES = (
    "problem.",
    "controller.",
    "schedule.",
    "sim.",
    "oracle.",
    "out.",
    "sweep.",
    "validation.",
)
_BARE_PROBLEM_KEYS = {"p", "q", "r", "a1", "a2", "b1", "b2", "n_max", "grid_size"}


@dataclass
class RunConfig:
    """Parsed configuration plus the raw text it came from."""

    entries: dict
    text: str
    base_dir: str = "."

    def get(self, key: str, default=None):
        return self.entries.get(key, default)

    def require(self, key: str) -> str:
        val = self.entries.get(key)
        if val is None or val == "":
            raise UsageError(f"missing required config key: {key}")
        return val

    def get_float(self, key: str, default=None) -> float | None:
        raw = self.entries.get(key)
        if raw is None or raw == "":
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise UsageError(f"config key {key} is not a number: {raw!r}") from exc

    def get_int(self, key: str, default=None) -> int | None:
        raw = self.entries.get(key)
        if raw is None or raw == "":
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise UsageError(f"config key {key} is not an integer: {raw!r}") from exc

    def get_bool(self, key: str, default: bool = False) -> bool:
        raw = self.entries.get(key)
        if raw is None or raw == "":
            return default
        lowered = raw.strip().lower()
        if lowered in {"1", "true", "yes", "on"}:
            return True
        if lowered in {"0", "false", "no", "off"}:
            return False
        raise UsageError(f"config key {key} is not a boolean: {raw!r}")

    # ------------------------------------------------------------------
    # builders
    # ------------------------------------------------------------------

    def _path(self, rel: str) -> str:
        return rel if os.path.isabs(rel) else os.path.join(self.base_dir, rel)

    def _coefficient(self, key: str, default: float | None, negate: bool = False):
        raw = self.entries.get(key, "")
        if raw == "" or raw is None:
            if default is None:
                raise UsageError(f"missing required config key: {key}")
            return Coefficient(-default if negate else default), True, (
                -default if negate else default
            )
        if raw.startswith("table:"):
            path = self._path(raw[len("table:") :])
            if not os.path.exists(path):
                raise UsageError(f"coefficient table not found: {path}")
            data = np.loadtxt(path, delimiter=",", skiprows=1)
            vals = -data[:, 1] if negate else data[:, 1]
            return Coefficient((data[:, 0], vals)), False, None
        try:
            const = float(raw)
        except ValueError as exc:
            raise UsageError(f"config key {key} must be a number or table:PATH: {raw!r}") from exc
        if negate:
            const = -const
        return Coefficient(const), True, const

    def build_problem(self) -> SLProblem:
        p, _, _ = self._coefficient("problem.p", 1.0)
        # file convention is growth-form; the operator wants the reaction sign
        q, _, _ = self._coefficient("problem.q", 0.0, negate=True)
        r, _, _ = self._coefficient("problem.r", 1.0)
        try:
            return SLProblem(
                p=p,
                q=q,
                r=r,
                b1=self.get_float("problem.b1", 1.0),
                b2=self.get_float("problem.b2", 0.0),
                a1=self.get_float("problem.a1", 1.0),
                a2=self.get_float("problem.a2", 0.0),
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    def build_eigensystem(self) -> EigenSystem:
        problem = self.build_problem()
        n_max = self.get_int("problem.n_max")
        if n_max is None:
            raise UsageError("missing required config key: problem.n_max")
        grid_size = self.get_int("problem.grid_size", 400)
        if n_max < 1 or grid_size < 2:
            raise UsageError(f"invalid problem sizes: n_max={n_max}, grid_size={grid_size}")
        if problem.is_constant_dirichlet:
            return analytic_eigensystem(
                problem.p.constant, -problem.q.constant, n_max=n_max, grid_size=grid_size
            )
        tol = self.get_float("problem.shoot_tol", 1e-10)
        return shoot_eigensystem(problem, n_max=n_max, grid_size=grid_size, tol=tol)

    def build_schedule(self, seed_override: int | None = None) -> SamplingSchedule:
        kind = self.get("schedule.kind", "periodic")
        T = self.get_float("schedule.T")
        if T is None:
            raise UsageError("missing required config key: schedule.T")
        seed = seed_override if seed_override is not None else self.get_int("schedule.seed", 0)
        times = None
        raw_times = self.get("schedule.times", "")
        if raw_times:
            if raw_times.startswith("table:"):
                path = self._path(raw_times[len("table:") :])
                if not os.path.exists(path):
                    raise UsageError(f"schedule times file not found: {path}")
                times = np.loadtxt(path, ndmin=1).tolist()
            else:
                times = [float(tok) for tok in raw_times.split(",") if tok.strip()]
        try:
            return make_schedule(kind, T, seed=seed, times=times)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    def build_x0(self, eigsys: EigenSystem) -> np.ndarray:
        raw = self.get("sim.x0", "poly:0,4,-4")
        grid = eigsys.grid
        if raw.startswith("poly:"):
            coeffs = [float(tok) for tok in raw[len("poly:") :].split(",") if tok.strip()]
            return np.polynomial.polynomial.polyval(grid, coeffs)
        if raw.startswith("mode:"):
            idx = int(raw[len("mode:") :])
            if not (1 <= idx <= eigsys.n_max):
                raise UsageError(f"sim.x0 mode index {idx} outside stored range 1..{eigsys.n_max}")
            return eigsys.pairs[idx - 1].phi.copy()
        if raw.startswith("sine:"):
            coeffs = [float(tok) for tok in raw[len("sine:") :].split(",") if tok.strip()]
            return sine_reconstruct(np.asarray(coeffs) / np.sqrt(2.0), grid) * np.sqrt(2.0)
        if raw.startswith("table:"):
            path = self._path(raw[len("table:") :])
            if not os.path.exists(path):
                raise UsageError(f"x0 table not found: {path}")
            from scipy.interpolate import CubicSpline

            data = np.loadtxt(path, delimiter=",", skiprows=1)
            return CubicSpline(data[:, 0], data[:, 1])(grid)
        raise UsageError(f"unrecognized sim.x0 specification: {raw!r}")

    def build_controller(self, eigsys: EigenSystem):
        kind = self.get("controller.type", "none").strip().lower()
        if kind == "none":
            return None
        if kind == "reduced":
            from .reduced_design import synthesize_reduced

            poles = None
            raw = self.get("controller.poles", "")
            if raw:
                poles = [complex(tok.replace("i", "j")) for tok in raw.split(",") if tok.strip()]
            m = self.get_int("controller.m")
            return synthesize_reduced(eigsys, poles=poles, m=m)
        if kind == "backstepping":
            from .backstepping_design import synthesize_backstepping

            problem = eigsys.problem
            if eigsys.analytic is None:
                raise UsageError(
                    "backstepping requires the constant-coefficient Dirichlet problem"
                )
            return synthesize_backstepping(
                eigsys.analytic.p,
                eigsys.analytic.growth,
                c=self.get_float("controller.c"),
                sigma=self.get_float("controller.sigma"),
                kernel_grid_m=eigsys.m_intervals,
            )
        raise UsageError(f"unknown controller.type: {kind!r}")


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse flat key-value text into a RunConfig."""
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, val = stripped.partition("=")
        key = key.strip()
        val = val.split("#", 1)[0].strip()
        if key in _BARE_PROBLEM_KEYS:
            key = f"problem.{key}"
        elif not key.startswith(_KNOWN_PREFIXES):
            raise UsageError(f"line {lineno}: unknown config key {key!r}")
        entries[key] = val
    return RunConfig(entries=entries, text=text, base_dir=base_dir)


def load_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
