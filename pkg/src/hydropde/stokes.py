"""Per-wavenumber realization of the constrained viscous operator.

At horizontal wavenumber k the negative Laplacian acts diagonally on the
stacked vertical-mode coefficients of both velocity components,

    Lambda = diag(4 pi^2 |k|^2 + lam_m^2)        (size 2 nz),

while the constraint div_H vbar = 0 reads n . c = 0 with the real vector
n = (kx a_0..a_{nz-1}, ky a_0..a_{nz-1}), a_m the vertical-average factors.
For k != 0 the constraint removes one degree of freedom; eliminating it with
an orthonormal basis Q of the hyperplane n-perp gives the reduced symmetric
positive definite block Q^T Lambda Q.  For k = 0 the constraint is vacuous
and the block is already diagonal.

Semigroup and resolvent applications use the cached eigendecompositions of
the reduced blocks, so the semigroup law and decay bounds hold at rounding
accuracy on the discrete operator.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DomainError, SingularResolventError
from .fields import SpectralField, sobolev_norm
from .grid import Grid
from .projection import SurfacePressure, constrain


def thread_limit():
    """Parallelism cap from the PE_THREADS environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("PE_THREADS", "1")))
    except ValueError:
        return 1


def _batched_eigh(mats):
    workers = thread_limit()
    if workers <= 1 or mats.shape[0] < 4 * workers:
        return np.linalg.eigh(mats)
    idx = np.array_split(np.arange(mats.shape[0]), workers)
    w = np.empty(mats.shape[:2])
    u = np.empty_like(mats)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        def job(ix):
            w[ix], u[ix] = np.linalg.eigh(mats[ix])
        list(pool.map(job, idx))
    return w, u


@dataclass(frozen=True)
class StokesBlock:
    """Dense realization at a single wavenumber, reduced to the constraint manifold."""

    k: tuple
    lam_diag: np.ndarray       # (2 nz,) diagonal of Lambda
    basis: np.ndarray          # (2 nz, r) orthonormal basis of the constraint manifold
    reduced: np.ndarray        # (r, r) SPD reduced block
    eigenvalues: np.ndarray    # (r,) ascending
    eigenvectors: np.ndarray   # (r, r)


def _constraint_vector(grid, k):
    a = grid.avg_factor
    return np.concatenate([k[0] * a, k[1] * a])


def _householder_basis(n):
    """Orthonormal basis of the hyperplane orthogonal to n (n != 0)."""
    nhat = n / np.linalg.norm(n)
    e = np.zeros_like(nhat)
    e[0] = 1.0 if nhat[0] >= 0 else -1.0
    u = nhat + e
    H = np.eye(len(n)) - 2.0 * np.outer(u, u) / (u @ u)
    return H[:, 1:]


def assemble_block(grid: Grid, k) -> StokesBlock:
    """Reference (single-wavenumber) block assembly."""
    kx, ky = int(k[0]), int(k[1])
    if kx not in grid.kx or ky not in grid.ky:
        raise ConfigurationError(f"wavenumber {k} outside grid {grid.nx}x{grid.ny}")
    lam_diag = np.tile(4 * np.pi**2 * (kx**2 + ky**2) + grid.lam**2, 2)
    if kx == 0 and ky == 0:
        Q = np.eye(2 * grid.nz)
    else:
        Q = _householder_basis(_constraint_vector(grid, (kx, ky)))
    R = (Q.T * lam_diag) @ Q
    R = 0.5 * (R + R.T)
    w, U = np.linalg.eigh(R)
    return StokesBlock((kx, ky), lam_diag, Q, R, w, U)


def eigenmode(grid: Grid, k, m, amplitude=1.0, direction=None) -> SpectralField:
    """Exact eigenfunction: a cos(2 pi k.x) phi_m(z) with a perpendicular to k.

    Eigenvalue 4 pi^2 |k|^2 + lam_m^2.  For k = 0 every direction is on the
    constraint manifold; the default is (1, 0).
    """
    kx, ky = int(k[0]), int(k[1])
    if m < 0 or m >= grid.nz:
        raise ConfigurationError(f"vertical mode {m} outside 0..{grid.nz - 1}")
    if kx not in grid.kx or ky not in grid.ky:
        raise ConfigurationError(f"wavenumber {k} outside grid {grid.nx}x{grid.ny}")
    if kx == 0 and ky == 0:
        d = np.array([1.0, 0.0]) if direction is None else np.asarray(direction, float)
    elif direction is None:
        d = np.array([-ky, kx], float)
    else:
        d = np.asarray(direction, float)
        if abs(kx * d[0] + ky * d[1]) > 1e-13 * np.linalg.norm(d):
            raise ConfigurationError("eigenmode direction must be perpendicular to k")
    d = d / np.linalg.norm(d)
    c = np.zeros((2, grid.nx, grid.ny, grid.nz), complex)
    ix, iy = list(grid.kx).index(kx), list(grid.ky).index(ky)
    if kx == 0 and ky == 0:
        c[:, ix, iy, m] = amplitude * d
    else:
        jx, jy = list(grid.kx).index(-kx), list(grid.ky).index(-ky)
        c[:, ix, iy, m] = 0.5 * amplitude * d
        c[:, jx, jy, m] = 0.5 * amplitude * d
    return SpectralField(grid, c)


def eigenmode_eigenvalue(grid: Grid, k, m) -> float:
    return float(4 * np.pi**2 * (k[0] ** 2 + k[1] ** 2) + grid.lam[m] ** 2)


@dataclass(frozen=True)
class SpectrumReport:
    beta: float
    entries: tuple  # ((kx, ky), eigenvalue array) pairs

    def all_eigenvalues(self):
        return np.concatenate([np.asarray(e) for _, e in self.entries])


@dataclass(frozen=True)
class SectorSweepReport:
    eps: float
    rows: tuple  # (lambda, M(lambda)) pairs
    sup_m: float


@dataclass(frozen=True)
class SmoothingReport:
    theta1: float
    theta2: float
    rows: tuple  # (t, g(t)) pairs
    sup_g: float


class StokesOperator:
    """Cached block eigenstructure for a grid, with vectorized applications."""

    def __init__(self, grid: Grid):
        self.grid = grid

    # -- layout helpers: flat wavenumber index 0 is k = (0, 0) -----------

    def _vecs(self, coeffs):
        g = self.grid
        return coeffs.transpose(1, 2, 0, 3).reshape(g.nx * g.ny, 2 * g.nz)

    def _unvecs(self, vecs):
        g = self.grid
        return np.ascontiguousarray(
            vecs.reshape(g.nx, g.ny, 2, g.nz).transpose(2, 0, 1, 3)
        )

    @cached_property
    def _lam_flat(self):
        g = self.grid
        lam2 = np.tile(g.lam**2, 2)
        k2 = g.k2.reshape(-1)
        return k2[:, None] + lam2[None, :]

    @cached_property
    def _nvecs(self):
        g = self.grid
        a = g.avg_factor
        kxg = np.repeat(g.kx.astype(float), g.ny)
        kyg = np.tile(g.ky.astype(float), g.nx)
        n = np.concatenate([kxg[:, None] * a, kyg[:, None] * a], axis=1)
        return n[1:]

    @cached_property
    def _decomposition(self):
        """Per-block (k != 0) orthonormal bases V with A V = V diag(mu)."""
        n = self._nvecs
        nhat = n / np.linalg.norm(n, axis=1, keepdims=True)
        u = nhat.copy()
        u[:, 0] += np.where(nhat[:, 0] >= 0, 1.0, -1.0)
        scale = 2.0 / np.einsum("ki,ki->k", u, u)
        dim = n.shape[1]
        Q = -scale[:, None, None] * u[:, :, None] * u[:, None, 1:]
        Q[:, 1:, :] += np.eye(dim - 1)[None, :, :]
        lam = self._lam_flat[1:]
        R = np.einsum("kiq,ki,kir->kqr", Q, lam, Q)
        R = 0.5 * (R + np.swapaxes(R, 1, 2))
        mu, U = _batched_eigh(R)
        V = np.einsum("kiq,kqr->kir", Q, U)
        return mu, V

    @cached_property
    def _all_eigenvalues(self):
        mu, _ = self._decomposition
        return np.concatenate([self._lam_flat[0], mu.reshape(-1)])

    @property
    def beta(self):
        """Smallest eigenvalue: the exponential decay rate of the semigroup."""
        return float(self._all_eigenvalues.min())

    # -- projections ------------------------------------------------------

    def constrain(self, v: SpectralField) -> SpectralField:
        """Orthogonal coefficient-space projection onto div_H vbar = 0."""
        return constrain(v)

    def apply(self, v: SpectralField) -> SpectralField:
        """A v for v on the constraint manifold (projects input and output)."""
        vc = self.constrain(v)
        lam = self.grid.laplace_symbol
        return self.constrain(SpectralField(self.grid, lam[None] * vc.coeffs))

    # -- semigroup ---------------------------------------------------------

    def semigroup_apply(self, t, f: SpectralField) -> SpectralField:
        """exp(-tA) applied to the constrained part of f."""
        if t < 0:
            raise DomainError(f"semigroup time must be >= 0, got {t}")
        vec = self._vecs(self.constrain(f).coeffs)
        mu, V = self._decomposition
        out = np.empty_like(vec)
        out[0] = np.exp(-t * self._lam_flat[0]) * vec[0]
        y = np.einsum("kir,ki->kr", V, vec[1:])
        y *= np.exp(-t * mu)
        out[1:] = np.einsum("kir,kr->ki", V, y)
        return SpectralField(self.grid, self._unvecs(out))

    # -- eigenbasis coordinates (for Duhamel integrals and implicit steps) --

    def eigenvalues_split(self):
        """(k=0 diagonal eigenvalues, stacked k != 0 eigenvalues) arrays."""
        mu, _ = self._decomposition
        return self._lam_flat[0], mu

    def to_eigen(self, f: SpectralField):
        """Coordinates of the constrained part of f in the A-eigenbasis."""
        vec = self._vecs(self.constrain(f).coeffs)
        _, V = self._decomposition
        return vec[0].copy(), np.einsum("kir,ki->kr", V, vec[1:])

    def from_eigen(self, y0, y) -> SpectralField:
        _, V = self._decomposition
        vec = np.empty((self.grid.nx * self.grid.ny, 2 * self.grid.nz), complex)
        vec[0] = y0
        vec[1:] = np.einsum("kir,kr->ki", V, y)
        return SpectralField(self.grid, self._unvecs(vec))

    def solve_shifted(self, c, f: SpectralField) -> SpectralField:
        """(I + c A)^{-1} f for c > -1/max eigenvalue (f projected internally)."""
        mu0, mu = self.eigenvalues_split()
        y0, y = self.to_eigen(f)
        return self.from_eigen(y0 / (1 + c * mu0), y / (1 + c * mu))

    # -- resolvent ---------------------------------------------------------

    def resolvent_solve(self, lam, f: SpectralField):
        """Solve (lam + A) v = P f; returns (v, pi).

        pi is the surface pressure balancing the residual of the full
        momentum equation at each wavenumber.
        """
        g = self.grid
        lam = complex(lam)
        dist = np.abs(lam + self._all_eigenvalues)
        if dist.min() <= 1e-12 * max(1.0, abs(lam)):
            raise SingularResolventError(
                f"lambda = {lam} lies in (or within rounding of) the spectrum"
            )
        fc = self.constrain(f)
        vec = self._vecs(fc.coeffs)
        mu, V = self._decomposition
        out = np.empty_like(vec)
        out[0] = vec[0] / (lam + self._lam_flat[0])
        y = np.einsum("kir,ki->kr", V, vec[1:])
        y /= lam + mu
        out[1:] = np.einsum("kir,kr->ki", V, y)
        # pressure from the momentum residual: r = P f - (lam + Lambda) v is
        # parallel to the constraint normal, whose fold has column 4 pi i n
        resid = vec[1:] - (lam + self._lam_flat[1:]) * out[1:]
        n = self._nvecs
        n2 = np.einsum("ki,ki->k", n, n)
        pihat_flat = np.zeros(g.nx * g.ny, complex)
        pihat_flat[1:] = np.einsum("ki,ki->k", n, resid) / (4j * np.pi * n2)
        pi = SurfacePressure(g, pihat_flat.reshape(g.nx, g.ny))
        return SpectralField(g, self._unvecs(out)), pi

    # -- reports -----------------------------------------------------------

    def spectrum(self) -> SpectrumReport:
        g = self.grid
        mu, _ = self._decomposition
        entries = [((0, 0), self._lam_flat[0].copy())]
        kxg = np.repeat(g.kx, g.ny)
        kyg = np.tile(g.ky, g.nx)
        for row in range(mu.shape[0]):
            entries.append(((int(kxg[row + 1]), int(kyg[row + 1])), mu[row].copy()))
        return SpectrumReport(beta=self.beta, entries=tuple(entries))

    def sector_sweep(self, eps, lambdas=None) -> SectorSweepReport:
        """M(lambda) = |lambda| ||(lambda + A)^{-1}|| over a sector sweep."""
        if not 0 < eps < np.pi / 2:
            raise DomainError(f"sector opening eps must lie in (0, pi/2), got {eps}")
        if lambdas is None:
            radii = np.logspace(-3, 6, 19)
            args = np.linspace(0.0, np.pi - eps, 7)
            lambdas = [r * np.exp(1j * th) for r in radii for th in args]
        evs = self._all_eigenvalues
        rows = []
        for lam in lambdas:
            m = float(np.max(np.abs(lam) / np.abs(lam + evs)))
            rows.append((complex(lam), m))
        return SectorSweepReport(eps=eps, rows=tuple(rows), sup_m=max(m for _, m in rows))

    def smoothing_probe(self, theta1, theta2, t_samples, f: SpectralField) -> SmoothingReport:
        """sup_t t^theta1 e^(beta t) ||exp(-tA) f||_{H^{2(theta1+theta2)}} / ||f||_{H^{2 theta2}}."""
        if theta1 < 0 or theta2 < 0 or theta1 + theta2 > 1:
            raise DomainError("need theta1, theta2 >= 0 with theta1 + theta2 <= 1")
        fc = self.constrain(f)
        denom = sobolev_norm(fc, 2 * theta2)
        beta = self.beta
        rows = []
        for t in t_samples:
            num = sobolev_norm(self.semigroup_apply(t, fc), 2 * (theta1 + theta2))
            g = (t**theta1) * np.exp(beta * t) * num / denom
            rows.append((float(t), float(g)))
        return SmoothingReport(theta1, theta2, tuple(rows), max(g for _, g in rows))
