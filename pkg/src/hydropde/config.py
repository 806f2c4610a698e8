"""Run configuration: line-oriented `key = value` files and the initial
condition library.

Unknown keys, malformed values, and out-of-range values are rejected with
the offending line number.  Defaults: nx = ny = 32, nz = 16, h = 1,
dt = 1e-3, dealias = 2/3.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fields import SpectralField, random_spectral
from .grid import Grid
from .projection import constrain
from .stokes import eigenmode


@dataclass(frozen=True)
class InitialConditionSpec:
    kind: str = "eigenmode"  # eigenmode | random-band | shear | manufactured
    amplitude: float = 1e-3
    kx: int = 1
    ky: int = 0
    m: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("eigenmode", "random-band", "shear", "manufactured"):
            raise ConfigurationError(f"unknown initial condition kind {self.kind!r}")
        if not self.amplitude > 0:
            raise ConfigurationError(f"initial amplitude must be > 0, got {self.amplitude}")


@dataclass(frozen=True)
class RunConfig:
    nx: int = 32
    ny: int = 32
    nz: int = 16
    h: float = 1.0
    dealias: float = 2.0 / 3.0
    dt: float = 1e-3
    t_end: float = 1.0
    scheme: str = "imex2"       # imex1 | imex2 | picard
    sample_every: int = 10
    cfl_limit: float = 50.0
    ic: InitialConditionSpec = field(default_factory=InitialConditionSpec)
    forcing: str = "zero"       # zero | single-mode | mms
    forcing_amplitude: float = 0.0
    forcing_kx: int = 1
    forcing_ky: int = 0
    forcing_m: int = 0
    forcing_rate: float = 1.0
    picard_nodes: int = 33
    picard_max_iterations: int = 12
    picard_tolerance: float = 1e-12
    out_ledger: str = "run.csv"
    out_report: str = "report.json"
    out_checkpoint: str = ""

    def grid(self) -> Grid:
        return Grid(self.nx, self.ny, self.nz, self.h, self.dealias)


_INT_KEYS = {
    "nx", "ny", "nz", "sample_every", "picard_nodes", "picard_max_iterations",
    "ic_kx", "ic_ky", "ic_m", "seed", "forcing_kx", "forcing_ky", "forcing_m",
}
_FLOAT_KEYS = {
    "h", "dealias", "dt", "t_end", "cfl_limit", "amplitude",
    "forcing_amplitude", "forcing_rate", "picard_tolerance",
}
_STR_KEYS = {"scheme", "ic", "forcing", "out_ledger", "out_report", "out_checkpoint"}
_POSITIVE = {"h", "dt", "t_end", "cfl_limit", "amplitude", "picard_tolerance"}


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError:
                raise ConfigurationError(f"line {lineno}: {key} needs an integer, got {val!r}")
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise ConfigurationError(f"line {lineno}: {key} needs a number, got {val!r}")
            if key in _POSITIVE and not values[key] > 0:
                raise ConfigurationError(f"line {lineno}: {key} must be > 0, got {val}")
        elif key in _STR_KEYS:
            values[key] = val
        else:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")

    ic_kw = {}
    for src, dst in (("ic", "kind"), ("amplitude", "amplitude"), ("ic_kx", "kx"),
                     ("ic_ky", "ky"), ("ic_m", "m"), ("seed", "seed")):
        if src in values:
            ic_kw[dst] = values.pop(src)
    try:
        ic = InitialConditionSpec(**ic_kw)
        cfg = RunConfig(ic=ic, **values)
        if cfg.scheme not in ("imex1", "imex2", "picard"):
            raise ConfigurationError(f"unknown scheme {cfg.scheme!r}")
        if cfg.forcing not in ("zero", "single-mode", "mms"):
            raise ConfigurationError(f"unknown forcing {cfg.forcing!r}")
        cfg.grid()  # validates grid parameters
    except TypeError as exc:
        raise ConfigurationError(str(exc))
    return cfg


def make_initial(spec: InitialConditionSpec, grid: Grid) -> SpectralField:
    """Deterministic initial velocity on the constraint manifold."""
    if spec.kind == "eigenmode":
        return eigenmode(grid, (spec.kx, spec.ky), spec.m, amplitude=spec.amplitude)
    if spec.kind == "random-band":
        rng = np.random.default_rng(spec.seed)
        return constrain(random_spectral(grid, 2, rng, amplitude=spec.amplitude))
    if spec.kind == "shear":
        # (0, u(x) phi_m(z)): y-independent, x-velocity zero, so the
        # averaged divergence vanishes without projection
        if spec.m < 0 or spec.m >= grid.nz:
            raise ConfigurationError(f"vertical mode {spec.m} outside 0..{grid.nz - 1}")
        if spec.kx not in grid.kx:
            raise ConfigurationError(f"shear wavenumber {spec.kx} outside grid")
        c = np.zeros((2, grid.nx, grid.ny, grid.nz), complex)
        ix = list(grid.kx).index(spec.kx)
        jx = list(grid.kx).index(-spec.kx)
        c[1, ix, 0, spec.m] = -0.5j * spec.amplitude
        c[1, jx, 0, spec.m] = 0.5j * spec.amplitude
        return SpectralField(grid, c)
    if spec.kind == "manufactured":
        return manufactured_profile(grid, spec)
    raise ConfigurationError(f"unknown initial condition kind {spec.kind!r}")


def manufactured_profile(grid: Grid, spec: InitialConditionSpec) -> SpectralField:
    """Band-limited constrained profile used as the manufactured target shape."""
    rng = np.random.default_rng(spec.seed)
    kmax = min(2, grid.nx // 4)
    mmax = min(2, grid.nz)
    return constrain(random_spectral(grid, 2, rng, kmax=kmax, mmax=mmax,
                                     amplitude=spec.amplitude))
