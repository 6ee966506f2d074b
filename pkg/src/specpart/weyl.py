"""Weyl coefficients: closed forms from the symbol, fits from the spectrum.

At d = 2 the sublevel area {xi : h(x, xi) < 1} reduces by homogeneity to a
cosphere quadrature, (1/2) integral of h(x, theta)^(-2/s) d theta, which the
uniform theta grid evaluates with spectral accuracy.  The mollified spectral
density is computed by the wave-trace route: the smoothing kernel has
compactly supported Fourier transform, so the density is a short time
integral of mu_hat(t) times the trace of the evolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigenstructure import EigenDecomposition
from .errors import ComputationError, DimensionMismatchError
from .fourier import grid_size
from .projections import ProjectionSet, fit_loglog_slope
from .quantization import smooth_step
from .spectral import SpectrumRecord
from .symbols import (
    HomogeneousComponent,
    Symbol,
    comp_mul,
    comp_scale,
    comp_star,
    generalized_bracket,
    poisson_bracket,
    subprincipal,
)

VOL_TORUS = (2.0 * np.pi) ** 2


# ---------------------------------------------------------------------------
# leading coefficient: b and a_{d-1}
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeylLeading:
    d: float
    s: float
    b_total: float
    b_per_j: dict            # j -> b_j (x-average of the sublevel area / (2 pi)^d * vol)
    a1_per_j: dict           # j -> grid function a_{d-1}^(j)(x)
    a1_integral_per_j: dict  # j -> integral over the torus
    nx: int

    @property
    def a1_integral_total(self) -> float:
        return float(sum(self.a1_integral_per_j.values()))

    def remark_identity_gap(self) -> float:
        """|b - (1/d) integral a_{d-1}| (exact identity up to quadrature)."""
        return abs(self.b_total - self.a1_integral_total / self.d)


def weyl_leading(decomp: EigenDecomposition, s: float, d: int = 2) -> WeylLeading:
    """Leading Weyl data from the positive eigenvalue fields.

    b_j = (2 pi)^{-d} Vol(T^2) x-mean of Area{h^(j)(x, .) < 1} and
    a_{d-1}^(j)(x) = (d / (2 pi)^d) Area(x); at d = 2 the area is
    (1/2) integral h^{-2/s} d theta.
    """
    if d != 2:
        raise NotImplementedError("only d = 2 is supported")
    b_per, a1_per, a1_int = {}, {}, {}
    nx_common = None
    for f in decomp.positive:
        nx = grid_size(f.h.x_band, floor=16)
        nt = grid_size(f.h.theta_band, floor=64)
        h = f.h.eval_grid(nx, nt)[..., 0, 0].real
        if np.any(h <= 0):
            raise ComputationError(f"branch {f.index} is not positive")
        area = 0.5 * np.mean(h ** (-d / s), axis=2) * 2.0 * np.pi  # (nx, nx)
        a1 = d / (2.0 * np.pi) ** d * area
        b_per[f.index] = float(np.mean(area))
        a1_per[f.index] = a1
        a1_int[f.index] = float(np.mean(a1) * VOL_TORUS)
        nx_common = nx
    return WeylLeading(
        d=float(d), s=float(s),
        b_total=float(sum(b_per.values())),
        b_per_j=b_per, a1_per_j=a1_per, a1_integral_per_j=a1_int,
        nx=nx_common or 16,
    )


# ---------------------------------------------------------------------------
# second coefficient: a_{d-2}
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeylSecond:
    a2_per_j: dict           # j -> grid function a_{d-2}^(j)(x)
    a2_integral_per_j: dict
    imag_residual: float     # max imaginary part of the integrand trace

    @property
    def a2_integral_total(self) -> float:
        return float(sum(self.a2_integral_per_j.values()))


def weyl_second(a: Symbol, pset: ProjectionSet, d: int = 2) -> WeylSecond:
    """Second Weyl coefficient of each positive branch (first-order operators).

    Integrand: tr(P^(j) A_sub + (i/2){P^(j), P^(j)} A_prin
               - (1/(d-1)) h^(j) (P_j)_sub) over the sublevel set, with
    prefactor -d(d-1)/(2 pi)^d.
    """
    if d != 2:
        raise NotImplementedError("only d = 2 is supported")
    if abs(a.order - 1.0) > 1e-12:
        raise DimensionMismatchError(
            f"second Weyl coefficient requires a first-order operator, got order {a.order}"
        )
    a_sub = subprincipal(a)
    a_prin = a.principal
    out, out_int = {}, {}
    imag_res = 0.0
    for f in pset.decomp.positive:
        j = f.index
        p_field = f.projector
        pj_sub = subprincipal(pset.projection(j))
        term1 = comp_mul(p_field, a_sub)
        term2 = comp_scale(comp_mul(poisson_bracket(p_field, p_field), a_prin), 0.5j)
        term3 = comp_scale(comp_mul(f.h, pj_sub), -1.0 / (d - 1))
        xb = max(t.x_band for t in (term1, term2, term3))
        tb = max(t.theta_band for t in (term1, term2, term3))
        nx = grid_size(xb, floor=16)
        nt = grid_size(tb, floor=64)
        integrand = sum(
            np.trace(t.eval_grid(nx, nt), axis1=-2, axis2=-1)
            for t in (term1, term2, term3)
        )
        imag_res = max(imag_res, float(np.max(np.abs(integrand.imag))))
        h = f.h.eval_grid(nx, nt)[..., 0, 0].real
        radial = 0.5 * np.mean(integrand.real * h ** (-2.0), axis=2) * 2.0 * np.pi
        a2 = -d * (d - 1) / (2.0 * np.pi) ** d * radial
        out[j] = a2
        out_int[j] = float(np.mean(a2) * VOL_TORUS)
    return WeylSecond(a2_per_j=out, a2_integral_per_j=out_int, imag_residual=imag_res)


def bracket_identity_residual(
    a_prin: HomogeneousComponent,
    field,
    ref_vector: np.ndarray | None = None,
) -> float:
    """Two-route check of tr({P, P} A_prin) via the generalized bracket.

    With v the branch eigenvector (phase fixed through P w / |P w| for a
    fixed reference w), the routes

        {v*, A_prin, v}  and  -tr({P, P} A_prin) + h {v*, v}

    must agree pointwise.  Returns the max absolute mismatch at |xi| = 1.
    """
    p = field.projector
    m = p.rows
    if ref_vector is None:
        ref_vector = np.arange(1, m + 1) / np.sqrt(np.sum(np.arange(1.0, m + 1) ** 2))
    xb = 2 * p.x_band
    tb = 2 * p.theta_band
    nx = grid_size(xb, floor=16)
    nt = grid_size(tb, floor=32)
    pg = p.eval_grid(nx, nt)
    vg = pg @ np.asarray(ref_vector, dtype=np.complex128)
    norms = np.linalg.norm(vg, axis=-1, keepdims=True)
    if float(norms.min()) < 1e-6:
        raise ComputationError("reference vector degenerates; pick another")
    vg = vg / norms
    from .symbols import comp_from_grid

    v = comp_from_grid(vg[..., None], 0.0, xb, tb, band_tol=None)
    v_star = comp_star(v)
    lhs = generalized_bracket(v_star, a_prin, v)

    from .symbols import comp_add, comp_trace

    t_bracket = comp_scale(comp_trace(comp_mul(poisson_bracket(p, p), a_prin)), -1.0)
    hvv = comp_mul(field.h, poisson_bracket(v_star, v))
    rhs = comp_add(t_bracket, hvv)

    nx2 = grid_size(max(lhs.x_band, rhs.x_band), floor=16)
    nt2 = grid_size(max(lhs.theta_band, rhs.theta_band), floor=32)
    diff = lhs.eval_grid(nx2, nt2) - rhs.eval_grid(nx2, nt2)
    return float(np.max(np.abs(diff)))


# ---------------------------------------------------------------------------
# empirical fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeylFit:
    slope: float
    empirical_b: float
    window: tuple
    n_points: int


def empirical_weyl_fit(
    rec: SpectrumRecord,
    d: float,
    s: float,
    window: tuple | None = None,
    min_points: int = 50,
) -> WeylFit:
    """Least-squares fit of log N+(lambda) = log b + (d/s) log lambda.

    The default window is the upper half of the trusted region,
    [trusted_max/2, trusted_max]: below it the strict lattice count sits
    several percent under the power law (the circle-count deficit), which
    biases the intercept far beyond the asymptotic tolerance.  The fit runs
    over the eigenvalue staircase sampled at the eigenvalues themselves.
    """
    pos = rec.positive()
    if len(pos) < min_points:
        raise ComputationError(f"need at least {min_points} positive eigenvalues")
    if window is None:
        window = (rec.trusted_max / 2.0, rec.trusted_max)
    lo, hi = window
    ks = np.arange(1, len(pos) + 1, dtype=float)  # N+(lambda_k + 0) = k
    sel = (pos >= lo) & (pos <= hi)
    if np.sum(sel) < 2:
        raise ComputationError("fit window holds fewer than 2 eigenvalues")
    lx = np.log(pos[sel])
    ly = np.log(ks[sel])
    slope, intercept = np.polyfit(lx, ly, 1)
    return WeylFit(
        slope=float(slope),
        empirical_b=float(np.exp(intercept)),
        window=(float(lo), float(hi)),
        n_points=int(np.sum(sel)),
    )


# ---------------------------------------------------------------------------
# mollified spectral density (wave-trace route)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mollifier:
    """Even C-infinity kernel with hat(mu) = 1 on [-T0/4, T0/4], supp (-T0, T0)."""

    t0: float
    n_t: int = 4097

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(-self.t0, self.t0, self.n_t)

    def hat(self, t) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=float))
        return smooth_step((self.t0 - t) / (0.75 * self.t0))

    def __call__(self, x) -> np.ndarray:
        """mu(x) = (1/2pi) integral e^{itx} hat(mu)(t) dt by trapezoid."""
        t = self.t_grid
        w = np.full(self.n_t, t[1] - t[0])
        w[0] = w[-1] = 0.5 * (t[1] - t[0])
        ker = self.hat(t) * w
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = (np.cos(np.outer(x, t)) @ ker) / (2.0 * np.pi)
        return vals

    def antiderivative(self, x) -> np.ndarray:
        """M(x) = integral_{-inf}^{x} mu; uses (e^{itx} - 0)/(it) with the
        t = 0 singularity handled by the hat(0)/2 Heaviside limit."""
        t = self.t_grid
        w = np.full(self.n_t, t[1] - t[0])
        w[0] = w[-1] = 0.5 * (t[1] - t[0])
        ker = self.hat(t) * w
        x = np.atleast_1d(np.asarray(x, dtype=float))
        mid = self.n_t // 2
        mask = np.ones(self.n_t, dtype=bool)
        mask[mid] = False
        tt = t[mask]
        kk = ker[mask]
        vals = (np.sin(np.outer(x, tt)) / tt) @ kk / (2.0 * np.pi)
        vals += 0.5 + x * ker[mid] / (2.0 * np.pi)
        return vals


@dataclass(frozen=True)
class DensitySamples:
    grid: np.ndarray
    density: np.ndarray
    t0: float


def mollified_density(
    rec: SpectrumRecord,
    grid: np.ndarray,
    t0: float = 1.0,
    mollifier: Mollifier | None = None,
) -> DensitySamples:
    """Smoothed derivative of N+: sum_k mu(lambda - lambda_k), positive spectrum.

    Evaluated through S(t) = sum_k e^{-i t lambda_k} so the cost is
    (eigenvalues + grid) x quadrature nodes rather than their product.
    """
    if t0 <= 0:
        raise ValueError("T0 must be positive")
    mol = mollifier or Mollifier(t0)
    lam = rec.positive()
    grid = np.asarray(grid, dtype=float)
    t = mol.t_grid
    w = np.full(mol.n_t, t[1] - t[0])
    w[0] = w[-1] = 0.5 * (t[1] - t[0])
    ker = mol.hat(t) * w
    if len(lam) == 0:
        return DensitySamples(grid=grid, density=np.zeros_like(grid), t0=t0)
    s_t = np.exp(-1j * np.outer(t, lam)).sum(axis=1)
    vals = np.exp(1j * np.outer(grid, t)) @ (ker * s_t) / (2.0 * np.pi)
    if float(np.max(np.abs(vals.imag))) > 1e-8 * max(1.0, float(np.max(np.abs(vals.real)))):
        raise ComputationError("mollified density has a large imaginary part")
    return DensitySamples(grid=grid, density=vals.real, t0=t0)


def local_mollified_density(
    rec: SpectrumRecord,
    grid: np.ndarray,
    weights: np.ndarray,
    t0: float = 1.0,
) -> np.ndarray:
    """x-resolved version: sum_k w_k mu(lambda - lambda_k) for weight rows w.

    weights[i, k] = |v_k(x_i)|^2 evaluated by the caller; returns one density
    row per weight row.
    """
    mol = Mollifier(t0)
    lam = rec.positive()
    sel = rec.eigenvalues > rec.zero_tol
    t = mol.t_grid
    w = np.full(mol.n_t, t[1] - t[0])
    w[0] = w[-1] = 0.5 * (t[1] - t[0])
    ker = mol.hat(t) * w
    phases = np.exp(-1j * np.outer(t, lam))  # (n_t, n_pos)
    s_xt = phases @ weights[:, sel].T        # (n_t, n_rows)
    vals = np.exp(1j * np.outer(np.asarray(grid, float), t)) @ (ker[:, None] * s_xt)
    return vals.real / (2.0 * np.pi)


def smoothed_count(rec: SpectrumRecord, a: float, b: float, t0: float = 1.0) -> float:
    """Integral of the mollified density over [a, b] via the antiderivative."""
    mol = Mollifier(t0)
    lam = rec.positive()
    if len(lam) == 0:
        return 0.0
    return float(np.sum(mol.antiderivative(b - lam) - mol.antiderivative(a - lam)))


def density_linear_fit(samples: DensitySamples, window: tuple) -> tuple:
    """Fit density ~ A1 * lambda + A0 on the window; returns (A1, A0)."""
    sel = (samples.grid >= window[0]) & (samples.grid <= window[1])
    if np.sum(sel) < 2:
        raise ComputationError("density fit window too small")
    coeffs = np.polyfit(samples.grid[sel], samples.density[sel], 1)
    return float(coeffs[0]), float(coeffs[1])
