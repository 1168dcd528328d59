"""Finite-difference oracle for d rho/dt = L rho on an (x, x_d) lattice.

Nodes sit at ``-L + j h`` with ``h = 2L/N`` (N even), so both x = 0 and the
trace row x_d = 0 are lattice points. Derivatives are second-order central
differences with zero Dirichlet data outside the box; time stepping is
classical RK4.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sps

from .params import ModelParams

BOUNDARY_RATIO = 1e-6
GROWTH_LIMIT = 10.0


class GridInstability(RuntimeError):
    """The explicit integrator blew up."""


@dataclass(frozen=True)
class GridSpec:
    N: int = 128
    L: float = 8.0
    L_d: float | None = None  # half-width along x_d (defaults to L)

    def __post_init__(self):
        if self.N < 32 or self.N % 2:
            raise ValueError("N must be even and at least 32")
        if self.L <= 0 or (self.L_d is not None and self.L_d <= 0):
            raise ValueError("half-widths must be positive")

    @property
    def half_d(self) -> float:
        return self.L if self.L_d is None else self.L_d

    @property
    def h(self) -> float:
        return 2 * self.L / self.N

    @property
    def h_d(self) -> float:
        return 2 * self.half_d / self.N

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @property
    def xd(self) -> np.ndarray:
        return -self.half_d + self.h_d * np.arange(self.N)

    @property
    def diag_index(self) -> int:
        """Column of the x_d = 0 row."""
        return self.N // 2

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.xd, indexing="ij")

    def default_dt(self, p: ModelParams) -> float:
        return 0.2 * min(self.h, self.h_d) ** 2 / (1 + p.d2)

    def to_dict(self) -> dict:
        return {"N": self.N, "L": self.L, "L_d": self.half_d, "h": self.h, "h_d": self.h_d}


@dataclass
class GridField:
    values: np.ndarray  # values[i, j] = rho(x_i, x_d_j)
    grid: GridSpec
    t: float = 0.0

    @classmethod
    def sample(cls, state: Callable, grid: GridSpec, t: float = 0.0) -> "GridField":
        X, Y = grid.mesh()
        return cls(np.asarray(state(X, Y), complex), grid, t)

    def boundary_ratio(self) -> float:
        v = np.abs(self.values)
        peak = v.max()
        if peak == 0:
            return 0.0
        ring = max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max())
        return float(ring / peak)

    def boundary_clean(self) -> bool:
        return self.boundary_ratio() < BOUNDARY_RATIO

    def copy(self) -> "GridField":
        return GridField(self.values.copy(), self.grid, self.t)

    # --- snapshot I/O -------------------------------------------------
    def save(self, path: str | Path) -> None:
        """Flat little-endian complex128 data plus a JSON header next to it."""
        path = Path(path)
        self.values.astype("<c16").tofile(path)
        header = {"N": self.grid.N, "L": self.grid.L, "L_d": self.grid.half_d, "t": self.t,
                  "dtype": "complex128-le", "layout": "row-major [x, x_d]"}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(header, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "GridField":
        path = Path(path)
        hdr = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        g = GridSpec(hdr["N"], hdr["L"], hdr["L_d"])
        vals = np.fromfile(path, dtype="<c16").reshape(g.N, g.N)
        return cls(vals, g, hdr["t"])


# --- operators --------------------------------------------------------------

def _d1(n: int, h: float) -> sps.csr_matrix:
    return sps.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="csr") / (2 * h)


def _d2(n: int, h: float) -> sps.csr_matrix:
    return sps.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1],
                     format="csr") / h**2


@dataclass(frozen=True)
class GridOperators:
    grad: sps.csr_matrix
    grad_d: sps.csr_matrix
    lap: sps.csr_matrix
    lap_d: sps.csr_matrix
    x: sps.dia_matrix
    xd: sps.dia_matrix


def grid_operators(grid: GridSpec) -> GridOperators:
    n = grid.N
    I = sps.identity(n, format="csr")
    X, Y = grid.mesh()
    return GridOperators(
        grad=sps.kron(_d1(n, grid.h), I, format="csr"),
        grad_d=sps.kron(I, _d1(n, grid.h_d), format="csr"),
        lap=sps.kron(_d2(n, grid.h), I, format="csr"),
        lap_d=sps.kron(I, _d2(n, grid.h_d), format="csr"),
        x=sps.diags(X.ravel()), xd=sps.diags(Y.ravel()))


def discretize_generator(p: ModelParams, grid: GridSpec) -> sps.csr_matrix:
    o = grid_operators(grid)
    c2 = (p.d0 + p.d2 * p.nu**2 - 2 * p.nu * p.beta) / 2
    L = (1j * (o.grad @ o.grad_d) - 1j * (o.x @ o.xd) - c2 * (o.xd @ o.xd)
         + 1j * (p.d2 * p.nu - p.beta) * (o.xd @ o.grad) - p.nu * (o.xd @ o.grad_d)
         + p.d2 / 2 * o.lap)
    return sps.csr_matrix(L)


def apply_generator(op: sps.csr_matrix, f: GridField) -> GridField:
    return GridField((op @ f.values.ravel()).reshape(f.values.shape), f.grid, f.t)


# --- expectation values ---------------------------------------------------------

OBSERVABLES = ("1", "x", "xx", "p", "pp", "xp")


def grid_trace(values: np.ndarray, grid: GridSpec) -> complex:
    """Sum over the x_d = 0 row (exact trapezoid for data vanishing at the edges)."""
    return complex(values[:, grid.diag_index].sum() * grid.h)


def grid_expectation(f: GridField, observable: str = "1") -> complex:
    """Tr[O rho] with p represented by p_d = -i d/dx_d on the trace row."""
    g = f.grid
    j = g.diag_index
    v = f.values
    x = g.x
    row = v[:, j]
    d1 = (v[:, j + 1] - v[:, j - 1]) / (2 * g.h_d)
    d2 = (v[:, j + 1] - 2 * row + v[:, j - 1]) / g.h_d**2
    cols = {"1": row, "x": x * row, "xx": x * x * row,
            "p": -1j * d1, "pp": -d2, "xp": -1j * x * d1}
    if observable not in cols:
        raise ValueError(f"unknown observable {observable!r}; choose from {OBSERVABLES}")
    return complex(cols[observable].sum() * g.h)


# --- time stepping -------------------------------------------------------------

@dataclass
class EvolutionResult:
    field: GridField
    times: np.ndarray
    samples: dict[str, np.ndarray]
    steps: int
    dt: float
    trace_drift: float
    boundary_flagged: bool
    max_boundary_ratio: float

    def diagnostics(self) -> dict:
        return {"steps": self.steps, "dt": self.dt, "trace_drift": self.trace_drift,
                "boundary_flagged": self.boundary_flagged,
                "max_boundary_ratio": self.max_boundary_ratio}


def evolve(f: GridField, p: ModelParams, t_final: float, dt: float | None = None,
           sample_every: float | None = None,
           probes: dict[str, Callable[[GridField], complex]] | None = None,
           generator: sps.csr_matrix | None = None) -> EvolutionResult:
    """RK4 integration from f.t to f.t + t_final.

    ``probes`` are evaluated at t = f.t and every ``sample_every`` thereafter
    (rounded to whole steps).
    """
    g = f.grid
    op = discretize_generator(p, g) if generator is None else generator
    dt_max = g.default_dt(p)
    dt = dt_max if dt is None else dt
    steps = max(1, math.ceil(t_final / dt - 1e-9))
    dt = t_final / steps
    every = steps if sample_every is None else max(1, round(sample_every / dt))
    probes = probes or {}

    y = f.values.ravel().copy()
    shape = f.values.shape
    norm0 = np.max(np.abs(y))
    tr0 = grid_trace(f.values, g)
    times, samples = [], {k: [] for k in probes}
    max_ring = f.boundary_ratio()

    def record(k: int):
        cur = GridField(y.reshape(shape), g, f.t + k * dt)
        times.append(cur.t)
        for name, fn in probes.items():
            samples[name].append(fn(cur))

    record(0)
    for k in range(1, steps + 1):
        k1 = op @ y
        k2 = op @ (y + 0.5 * dt * k1)
        k3 = op @ (y + 0.5 * dt * k2)
        k4 = op @ (y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if k % 64 == 0 or k == steps:
            peak = np.max(np.abs(y))
            if not np.isfinite(peak) or peak > GROWTH_LIMIT * norm0:
                raise GridInstability(
                    f"norm grew from {norm0:.3g} to {peak:.3g} at t = {f.t + k * dt:.4g} "
                    f"(dt = {dt:.3g}, stability estimate {dt_max:.3g})")
            max_ring = max(max_ring, GridField(y.reshape(shape), g).boundary_ratio())
        if k % every == 0:
            record(k)
    out = GridField(y.reshape(shape), g, f.t + steps * dt)
    drift = abs(grid_trace(out.values, g) - tr0)
    return EvolutionResult(out, np.array(times), {k: np.array(v) for k, v in samples.items()},
                           steps, dt, float(drift), bool(max_ring >= BOUNDARY_RATIO), float(max_ring))


# --- fits --------------------------------------------------------------------------

def fit_decay(t, values) -> complex:
    """Rate sigma + i Omega of a single damped mode.

    Complex data and one-signed real data: least-squares slopes of log|v| and
    the unwrapped phase. Real oscillating data: two-term linear prediction
    (the mode pair e^{lambda t}, e^{lambda* t}); the root with Im >= 0 is returned.
    """
    t = np.asarray(t, float)
    v = np.asarray(values)
    if t.size < 32 or t.size != v.size:
        raise ValueError("need at least 32 samples")
    if not np.any(v):
        raise ValueError("signal is identically zero")
    scale = np.max(np.abs(v))
    if np.ptp(v.real) + np.ptp(v.imag) <= 1e-12 * scale:
        return 0j
    real = np.all(np.abs(v.imag) <= 1e-12 * scale)
    if not real or np.all(v.real > 0) or np.all(v.real < 0):
        slope_mag = np.polyfit(t, np.log(np.abs(v)), 1)[0]
        slope_ph = np.polyfit(t, np.unwrap(np.angle(v)), 1)[0] if not real else 0.0
        return complex(slope_mag, slope_ph)
    dt = np.diff(t)
    if np.ptp(dt) > 1e-9 * dt.mean():
        raise ValueError("oscillating real data must be uniformly sampled")
    y = v.real
    A = np.column_stack([y[1:-1], y[:-2]])
    c, *_ = np.linalg.lstsq(A, y[2:], rcond=None)
    roots = np.roots([1, -c[0], -c[1]]).astype(complex)
    rates = np.log(roots) / dt.mean()
    return complex(max(rates, key=lambda r: (r.imag, r.real)))


def convergence_order(errors, hs) -> float:
    """Least-squares slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


# --- trajectory output ------------------------------------------------------------

TRAJECTORY_COLUMNS = ("t", "trace_re", "x_mean", "p_mean", "x2", "p2", "energy")


def trajectory_probes() -> dict[str, Callable[[GridField], complex]]:
    return {k: (lambda obs: lambda f: grid_expectation(f, obs))(k) for k in ("1", "x", "p", "xx", "pp")}


def write_trajectory_csv(path: str | Path, res: EvolutionResult) -> None:
    s = res.samples
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"{c} [dimensionless]" for c in TRAJECTORY_COLUMNS])
        for i, t in enumerate(res.times):
            x2, p2 = s["xx"][i].real, s["pp"][i].real
            w.writerow([f"{t:.10g}", f"{s['1'][i].real:.12g}", f"{s['x'][i].real:.12g}",
                        f"{s['p'][i].real:.12g}", f"{x2:.12g}", f"{p2:.12g}",
                        f"{(x2 + p2) / 2:.12g}"])
