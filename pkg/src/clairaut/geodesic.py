"""Fixed-step RK4 integration of the geodesic equation.

Two interchangeable backends produce the same trace: a numba kernel that
interprets the metric's compiled expression program, and a numpy loop over
:meth:`ChartManifold.christoffel_values`.  The kernel is only usable for
metrics that carry a program (everything built from expressions).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _accel, _kernels
from .errors import IntegrationDivergedError, MetricSingularityError
from .geometry import ChartManifold, TangentVector, as_point, connection_term

DEFAULT_STEP = 1e-3
DEFAULT_SPEED_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GeodesicState:
    t: float
    point: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", as_point(self.point))
        v = np.array(self.velocity, dtype=float).reshape(-1)
        if v.shape != self.point.shape or not np.all(np.isfinite(v)) or not math.isfinite(self.t):
            raise ValueError("geodesic state must be finite with matching point/velocity lengths")
        object.__setattr__(self, "velocity", v)


@dataclass(frozen=True, eq=False)
class GeodesicTrace:
    times: np.ndarray
    points: np.ndarray  # (N, m)
    velocities: np.ndarray  # (N, m)
    speed2: np.ndarray
    step: float
    speed0: float
    backend: str = "numpy"

    def __len__(self):
        return self.times.shape[0]

    @property
    def states(self) -> list[GeodesicState]:
        return [GeodesicState(t, x, v) for t, x, v in zip(self.times, self.points, self.velocities)]

    def state(self, i: int) -> GeodesicState:
        return GeodesicState(self.times[i], self.points[i], self.velocities[i])

    @property
    def speed_drift(self) -> float:
        return float(np.max(np.abs(self.speed2 - self.speed0)))

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]

    def to_csv(self) -> str:
        m = self.points.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(m)] + [f"v{i + 1}" for i in range(m)] + ["speed2"])
        for t, x, v, s in zip(self.times, self.points, self.velocities, self.speed2):
            w.writerow([format(float(c), ".17g") for c in (t, *x, *v, s)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def geodesic_rhs(man: ChartManifold, s: GeodesicState) -> tuple[np.ndarray, np.ndarray]:
    return s.velocity.copy(), -connection_term(man, s.point, s.velocity, s.velocity)


def effective_speed_tolerance(speed_tol: float, speed0: float, duration: float, h: float) -> float:
    """Drift budget scaled by speed, duration and the h^4 error of larger steps."""
    return speed_tol * max(1.0, speed0) * max(1.0, duration) * max(1.0, (h / 1e-3) ** 4)


def _resolve_backend(man: ChartManifold, backend: Optional[str]) -> str:
    if backend is None:
        backend = _accel.default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and (man.metric.program is None or not _accel.HAVE_NUMBA):
        backend = "numpy"
    return backend


def integrate(
    man: ChartManifold,
    initial: GeodesicState,
    t_end: float,
    step: float = DEFAULT_STEP,
    speed_tol: float = DEFAULT_SPEED_TOL,
    backend: Optional[str] = None,
) -> GeodesicTrace:
    if not step > 0:
        raise ValueError("step must be positive")
    if not t_end > initial.t:
        raise ValueError("t_end must exceed the initial time")
    duration = t_end - initial.t
    n = max(1, math.ceil(duration / step - 1e-9))
    h = duration / n
    x0 = man.point(initial.point)
    v0 = initial.velocity
    used = _resolve_backend(man, backend)
    if used == "numba":
        prog = man.metric.program
        xs, vs, sp2, failed = _kernels.rk4_program(
            prog.ops, prog.args, prog.consts, prog.starts, prog.stack_size, x0, v0, h, n
        )
    else:
        xs, vs, sp2, failed = _kernels.rk4_numpy(man.christoffel_values, man.g, x0, v0, h, n)
    times = initial.t + h * np.arange(n + 1)
    if failed >= 0:
        raise MetricSingularityError(f"metric singular or undefined near t = {times[failed]:.6g}", time=float(times[failed]))
    speed0 = float(sp2[0])
    drift = np.abs(sp2 - speed0)
    bound = 100.0 * effective_speed_tolerance(speed_tol, speed0, duration, h)
    if np.max(drift) > bound:
        k = int(np.argmax(drift > bound))
        raise IntegrationDivergedError(
            f"speed drift {drift[k]:.3e} exceeds {bound:.3e} at t = {times[k]:.6g}", time=float(times[k])
        )
    return GeodesicTrace(times, xs, vs, sp2, h, speed0, used)


def exponential_map(man: ChartManifold, p, v, t: float = 1.0, step: float = DEFAULT_STEP, backend=None) -> np.ndarray:
    p = man.point(p)
    v = np.asarray(v.components if isinstance(v, TangentVector) else v, dtype=float)
    if t == 0 or not np.any(v):
        return p.copy()
    if t < 0:
        t, v = -t, -v
    return integrate(man, GeodesicState(0.0, p, v), t, step, backend=backend).endpoint
