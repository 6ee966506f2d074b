"""Matrix-valued classical symbols on T^2 x (R^2 \\ 0) and their calculus.

A homogeneous component of degree ``d`` is stored as a banded Fourier tensor
in the torus variable x and the cosphere angle theta; its value is

    a(x, xi) = |xi|^d  sum_{k, n} c[k, n] exp(i k.x) exp(i n theta(xi)).

Symbols are truncated polyhomogeneous sums of such components with degrees
descending in integer steps.  Composition, adjoint and brackets are computed
spectrally: x-derivatives multiply coefficients by i k, and xi-derivatives
act on (degree, angular mode) through the polar-coordinate ladder

    d/dxi_1 : (d, n) -> (d-1, n+1) * (d - n)/2  and  (d-1, n-1) * (d + n)/2,
    d/dxi_2 : (d, n) -> (d-1, n+1) * i(n - d)/2 and  (d-1, n-1) * i(n + d)/2,

both exact on the banded representation.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import BandOverflowError, DepthError, DimensionMismatchError
from .fourier import (
    coeffs_from_grid,
    eval_at_points,
    grid_from_coeffs,
    grid_size,
    mode_range,
)

DEFAULT_BAND_TOL = 1e-10

_MAGIC = b"SPSYM1"
_VERSION = 1


# ---------------------------------------------------------------------------
# homogeneous components
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HomogeneousComponent:
    """One positively homogeneous term of a symbol."""

    degree: float
    coeffs: np.ndarray  # (2X+1, 2X+1, 2T+1, rows, cols)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 5 or c.shape[0] != c.shape[1] or c.shape[0] % 2 == 0 or c.shape[2] % 2 == 0:
            raise ValueError(f"bad coefficient tensor shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def x_band(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def theta_band(self) -> int:
        return (self.coeffs.shape[2] - 1) // 2

    @property
    def rows(self) -> int:
        return self.coeffs.shape[3]

    @property
    def cols(self) -> int:
        return self.coeffs.shape[4]

    def eval_grid(self, nx: int | None = None, ntheta: int | None = None) -> np.ndarray:
        """Sample on the uniform grid at |xi| = 1."""
        nx = nx or grid_size(self.x_band)
        ntheta = ntheta or grid_size(self.theta_band)
        return grid_from_coeffs(self.coeffs, nx, ntheta)

    def eval_points(self, x1, x2, xi1, xi2) -> np.ndarray:
        """Evaluate at arbitrary phase-space points (vectorized)."""
        xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
        xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
        r = np.hypot(xi1, xi2)
        theta = np.arctan2(xi2, xi1)
        vals = eval_at_points(self.coeffs, x1, x2, theta)
        scale = r.astype(np.complex128) ** self.degree
        return vals * scale.reshape((-1,) + (1,) * (vals.ndim - 1))

    def norm(self) -> float:
        """Max over the sample grid of the matrix spectral norm at |xi| = 1."""
        g = self.eval_grid(
            grid_size(self.x_band, oversample=1.0, floor=16),
            grid_size(self.theta_band, oversample=1.0, floor=32),
        )
        if self.rows == 1 and self.cols == 1:
            return float(np.max(np.abs(g)))
        if self.rows == 2 and self.cols == 2:
            # closed-form largest singular value of a 2x2 block
            f2 = np.sum(np.abs(g) ** 2, axis=(-2, -1))
            det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
            disc = np.sqrt(np.maximum(f2 * f2 - 4.0 * np.abs(det) ** 2, 0.0))
            return float(np.sqrt(np.max(0.5 * (f2 + disc))))
        s = np.linalg.svd(g, compute_uv=False)
        return float(np.max(s[..., 0]))


def zero_component(degree: float, x_band: int, theta_band: int, rows: int, cols: int) -> HomogeneousComponent:
    return HomogeneousComponent(
        degree, np.zeros((2 * x_band + 1, 2 * x_band + 1, 2 * theta_band + 1, rows, cols), np.complex128)
    )


def component_from_modes(degree: float, entries: dict, x_band: int, theta_band: int, rows: int, cols: int) -> HomogeneousComponent:
    """Build a component from {(k1, k2, n): matrix} entries."""
    c = np.zeros((2 * x_band + 1, 2 * x_band + 1, 2 * theta_band + 1, rows, cols), np.complex128)
    for (k1, k2, n), mat in entries.items():
        c[k1 + x_band, k2 + x_band, n + theta_band] += np.asarray(mat, dtype=np.complex128)
    return HomogeneousComponent(degree, c)


def comp_pad(a: HomogeneousComponent, x_band: int, theta_band: int) -> HomogeneousComponent:
    """Embed into larger bands (no-op if already at least as large)."""
    if a.x_band == x_band and a.theta_band == theta_band:
        return a
    if x_band < a.x_band or theta_band < a.theta_band:
        raise ValueError("comp_pad cannot shrink bands")
    c = np.zeros((2 * x_band + 1, 2 * x_band + 1, 2 * theta_band + 1, a.rows, a.cols), np.complex128)
    sx = slice(x_band - a.x_band, x_band + a.x_band + 1)
    st = slice(theta_band - a.theta_band, theta_band + a.theta_band + 1)
    c[sx, sx, st] = a.coeffs
    return HomogeneousComponent(a.degree, c)


def comp_add(*comps: HomogeneousComponent) -> HomogeneousComponent:
    """Sum of components of one degree; bands grow to the union."""
    deg = comps[0].degree
    for c in comps:
        if abs(c.degree - deg) > 1e-12:
            raise ValueError("comp_add requires equal degrees")
        if (c.rows, c.cols) != (comps[0].rows, comps[0].cols):
            raise DimensionMismatchError("comp_add shape mismatch")
    xb = max(c.x_band for c in comps)
    tb = max(c.theta_band for c in comps)
    out = np.zeros((2 * xb + 1, 2 * xb + 1, 2 * tb + 1, comps[0].rows, comps[0].cols), np.complex128)
    for c in comps:
        out += comp_pad(c, xb, tb).coeffs
    return HomogeneousComponent(deg, out)


def comp_scale(a: HomogeneousComponent, z: complex) -> HomogeneousComponent:
    return HomogeneousComponent(a.degree, a.coeffs * z)


def comp_dx(a: HomogeneousComponent, axis: int) -> HomogeneousComponent:
    """d/dx_axis; exact, bands unchanged."""
    k = mode_range(a.x_band)
    shape = [1, 1, 1, 1, 1]
    shape[axis] = len(k)
    return HomogeneousComponent(a.degree, a.coeffs * (1j * k.reshape(shape)))


def comp_dxi(a: HomogeneousComponent, axis: int) -> HomogeneousComponent:
    """d/dxi_axis; degree drops by one, theta band grows by one."""
    d = a.degree
    tb = a.theta_band
    n = mode_range(tb).reshape(1, 1, -1, 1, 1)
    if axis == 0:
        up = (d - n) / 2.0
        down = (d + n) / 2.0
    elif axis == 1:
        up = 1j * (n - d) / 2.0
        down = 1j * (n + d) / 2.0
    else:
        raise ValueError("axis must be 0 or 1")
    out = np.zeros(
        (a.coeffs.shape[0], a.coeffs.shape[1], 2 * tb + 3, a.rows, a.cols), np.complex128
    )
    out[:, :, 2:] += up * a.coeffs
    out[:, :, :-2] += down * a.coeffs
    return HomogeneousComponent(d - 1.0, out)


def comp_mul(a: HomogeneousComponent, b: HomogeneousComponent) -> HomogeneousComponent:
    """Pointwise matrix product (1x1 factors broadcast as scalars); exact via
    an aliasing-free product grid."""
    a_scalar = a.rows == 1 and a.cols == 1
    b_scalar = b.rows == 1 and b.cols == 1
    if a.cols != b.rows and not (a_scalar or b_scalar):
        raise DimensionMismatchError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    xb = a.x_band + b.x_band
    tb = a.theta_band + b.theta_band
    nx = grid_size(xb, oversample=1.0)
    nt = grid_size(tb, oversample=1.0)
    ga = grid_from_coeffs(a.coeffs, nx, nt)
    gb = grid_from_coeffs(b.coeffs, nx, nt)
    if a.cols == b.rows:
        gc = np.matmul(ga, gb)
    elif a_scalar:
        gc = ga[..., 0, 0][..., None, None] * gb
    else:
        gc = ga * gb[..., 0, 0][..., None, None]
    c = coeffs_from_grid(gc, xb, tb)
    return HomogeneousComponent(a.degree + b.degree, c)


def comp_star(a: HomogeneousComponent) -> HomogeneousComponent:
    """Pointwise conjugate transpose: conjugate coefficients, reverse modes."""
    c = a.coeffs[::-1, ::-1, ::-1].conj()
    c = np.swapaxes(c, 3, 4)
    return HomogeneousComponent(a.degree, np.ascontiguousarray(c))


def comp_trace(a: HomogeneousComponent) -> HomogeneousComponent:
    if a.rows != a.cols:
        raise DimensionMismatchError("trace needs a square matrix part")
    tr = np.trace(a.coeffs, axis1=3, axis2=4)[..., None, None]
    return HomogeneousComponent(a.degree, tr)


def comp_truncate(
    a: HomogeneousComponent,
    x_band: int,
    theta_band: int,
    band_tol: float | None = DEFAULT_BAND_TOL,
    what: str = "component",
) -> HomogeneousComponent:
    """Re-truncate to configured bands, certifying the discarded mass."""
    if a.x_band <= x_band and a.theta_band <= theta_band:
        return comp_pad(a, x_band, theta_band)
    xb = max(a.x_band, x_band)
    tb = max(a.theta_band, theta_band)
    full = comp_pad(a, xb, tb).coeffs
    if band_tol is not None:
        kept_mask = np.zeros(full.shape[:3], dtype=bool)
        ix = mode_range(x_band) + xb
        it = mode_range(theta_band) + tb
        kept_mask[np.ix_(ix, ix, it)] = True
        mags = np.max(np.abs(full), axis=(3, 4))
        scale = max(float(mags.max()), 1.0)
        dropped = float(mags[~kept_mask].max()) if (~kept_mask).any() else 0.0
        if dropped > band_tol * scale:
            raise BandOverflowError(
                f"{what}: band truncation to ({x_band},{theta_band}) discards "
                f"mass {dropped:.3e} (scale {scale:.3e}) > band_tol={band_tol:.1e}"
            )
    sx = slice(xb - x_band, xb + x_band + 1)
    st = slice(tb - theta_band, tb + theta_band + 1)
    return HomogeneousComponent(a.degree, np.ascontiguousarray(full[sx, sx, st]))


def comp_from_grid(
    values: np.ndarray,
    degree: float,
    x_band: int,
    theta_band: int,
    band_tol: float | None = DEFAULT_BAND_TOL,
    what: str = "field",
) -> HomogeneousComponent:
    c = coeffs_from_grid(values, x_band, theta_band, band_tol=band_tol, what=what)
    return HomogeneousComponent(degree, c)


def comp_max_abs(a: HomogeneousComponent) -> float:
    return float(np.max(np.abs(a.coeffs))) if a.coeffs.size else 0.0


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Symbol:
    """Truncated polyhomogeneous symbol: components of degrees s, s-1, ..., s-K."""

    order: float
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a symbol needs at least its principal component")
        for i, c in enumerate(comps):
            if abs(c.degree - (self.order - i)) > 1e-12:
                raise ValueError(
                    f"component {i} has degree {c.degree}, expected {self.order - i}"
                )
            if (c.rows, c.cols) != (comps[0].rows, comps[0].cols):
                raise DimensionMismatchError("all components must share the matrix shape")
        object.__setattr__(self, "components", comps)

    @property
    def m(self) -> int:
        return self.components[0].rows

    @property
    def depth(self) -> int:
        """Stored truncation depth K (components run down to degree order-K)."""
        return len(self.components) - 1

    @property
    def principal(self) -> HomogeneousComponent:
        return self.components[0]

    def component(self, k: int) -> HomogeneousComponent | None:
        """Component of degree order-k, or None beyond the stored depth."""
        return self.components[k] if 0 <= k <= self.depth else None

    def component_norms(self) -> list:
        return [c.norm() for c in self.components]

    def eval_points(self, x1, x2, xi1, xi2) -> np.ndarray:
        vals = self.components[0].eval_points(x1, x2, xi1, xi2)
        for c in self.components[1:]:
            vals = vals + c.eval_points(x1, x2, xi1, xi2)
        return vals


def identity_symbol(m: int, order: float = 0.0, depth: int = 0) -> Symbol:
    comps = [component_from_modes(order, {(0, 0, 0): np.eye(m)}, 0, 0, m, m)]
    for k in range(1, depth + 1):
        comps.append(zero_component(order - k, 0, 0, m, m))
    return Symbol(order, tuple(comps))


def pad_depth(a: Symbol, depth: int) -> Symbol:
    """Extend with zero components so the symbol stores `depth` orders."""
    if a.depth >= depth:
        return a
    comps = list(a.components)
    for k in range(a.depth + 1, depth + 1):
        comps.append(zero_component(a.order - k, 0, 0, a.m, a.m))
    return Symbol(a.order, tuple(comps))


def symbol_linear(coeff_pairs) -> Symbol:
    """Linear combination sum z_i * a_i of symbols with one order and depth."""
    pairs = list(coeff_pairs)
    order = pairs[0][1].order
    depth = max(a.depth for _, a in pairs)
    comps = []
    for k in range(depth + 1):
        terms = []
        for z, a in pairs:
            c = a.component(k)
            if c is None:
                continue
            terms.append(comp_scale(c, z))
        if not terms:
            terms = [zero_component(order - k, 0, 0, pairs[0][1].m, pairs[0][1].m)]
        comps.append(comp_add(*terms))
    return Symbol(order, tuple(comps))


def _band_targets(parts_by_order, x_band, theta_band):
    nonempty = [parts for parts in parts_by_order if parts]
    if x_band is None:
        x_band = max((max(c.x_band for c in parts) for parts in nonempty), default=0)
    if theta_band is None:
        theta_band = max((max(c.theta_band for c in parts) for parts in nonempty), default=0)
    return x_band, theta_band


def compose(
    a: Symbol,
    b: Symbol,
    depth: int,
    x_band: int | None = None,
    theta_band: int | None = None,
    band_tol: float | None = DEFAULT_BAND_TOL,
    strict_depth: bool = True,
) -> Symbol:
    """Truncated left-symbol composition of a and b.

    c ~ sum_{|alpha| <= depth} (-i)^|alpha| / alpha! d_xi^alpha a . d_x^alpha b,
    regrouped by homogeneity; result order is a.order + b.order.  With
    strict_depth the stored truncations must cover the request; otherwise
    missing components are treated as zero (used internally by recursions
    that build symbols order by order).
    """
    if a.m != b.m:
        raise DimensionMismatchError(f"compose: m={a.m} vs m={b.m}")
    if depth < 0:
        raise DepthError("depth must be nonnegative")
    if strict_depth and depth > min(a.depth, b.depth):
        raise DepthError(
            f"depth {depth} exceeds stored truncation (a: {a.depth}, b: {b.depth})"
        )
    s = a.order + b.order
    m = a.m

    # enumerate contributing (p, q, alpha) triples and the grid they need
    terms = []
    xsum_max, tsum_max = 0, 0
    for p in range(min(a.depth, depth) + 1):
        ap = a.component(p)
        if ap is None or comp_max_abs(ap) == 0.0:
            continue
        for q in range(min(b.depth, depth - p) + 1):
            bq = b.component(q)
            if bq is None or comp_max_abs(bq) == 0.0:
                continue
            for l in range(depth - p - q + 1):
                for a1 in range(l + 1):
                    a2 = l - a1
                    terms.append((p, q, a1, a2))
                    xsum_max = max(xsum_max, ap.x_band + bq.x_band)
                    tsum_max = max(tsum_max, ap.theta_band + l + bq.theta_band)
    if x_band is None or theta_band is None:
        xb_def = max((a.component(p).x_band + b.component(q).x_band
                      for p, q, _, _ in terms), default=0)
        tb_def = max((a.component(p).theta_band + (a1 + a2) + b.component(q).theta_band
                      for p, q, a1, a2 in terms), default=0)
        xb = xb_def if x_band is None else x_band
        tb = tb_def if theta_band is None else theta_band
    else:
        xb, tb = x_band, theta_band

    nx = grid_size(max(xsum_max, xb), oversample=1.0)
    nt = grid_size(max(tsum_max, tb), oversample=1.0)

    # accumulate products per output degree on one shared grid
    buckets = [None] * (depth + 1)
    xi_derivs = {}
    x_grids = {}
    for p, q, a1, a2 in terms:
        key = (p, a1, a2)
        if key not in xi_derivs:
            c = a.component(p)
            for _ in range(a1):
                c = comp_dxi(c, 0)
            for _ in range(a2):
                c = comp_dxi(c, 1)
            xi_derivs[key] = c
        keyb = (q, a1, a2)
        if keyb not in x_grids:
            c = b.component(q)
            for _ in range(a1):
                c = comp_dx(c, 0)
            for _ in range(a2):
                c = comp_dx(c, 1)
            x_grids[keyb] = grid_from_coeffs(c.coeffs, nx, nt)
        l = a1 + a2
        coef = (-1j) ** l / (factorial(a1) * factorial(a2))
        ga = grid_from_coeffs(xi_derivs[key].coeffs, nx, nt)
        prod = np.matmul(ga, x_grids[keyb])
        r = p + q + l
        if buckets[r] is None:
            buckets[r] = coef * prod
        else:
            buckets[r] += coef * prod

    comps = []
    for r in range(depth + 1):
        if buckets[r] is not None:
            c = comp_from_grid(buckets[r], s - r, xb, tb, band_tol=band_tol,
                               what=f"compose degree {s - r}")
        else:
            c = zero_component(s - r, xb, tb, m, m)
        comps.append(c)
    return Symbol(s, tuple(comps))


def adjoint_symbol(
    a: Symbol,
    depth: int | None = None,
    x_band: int | None = None,
    theta_band: int | None = None,
    band_tol: float | None = DEFAULT_BAND_TOL,
) -> Symbol:
    """Truncated asymptotic adjoint symbol.

    adj(a) ~ sum_{|alpha| <= depth} (-i)^|alpha| / alpha! d_xi^alpha d_x^alpha a*,
    with * the pointwise conjugate transpose.
    """
    if depth is None:
        depth = a.depth
    if depth > a.depth:
        raise DepthError(f"depth {depth} exceeds stored truncation {a.depth}")
    buckets = [[] for _ in range(depth + 1)]
    for l in range(min(a.depth, depth) + 1):
        base = comp_star(a.components[l])
        for r in range(l, depth + 1):
            order_alpha = r - l
            for a1 in range(order_alpha + 1):
                a2 = order_alpha - a1
                c = base
                for _ in range(a1):
                    c = comp_dxi(c, 0)
                for _ in range(a2):
                    c = comp_dxi(c, 1)
                for _ in range(a1):
                    c = comp_dx(c, 0)
                for _ in range(a2):
                    c = comp_dx(c, 1)
                coef = (-1j) ** order_alpha / (factorial(a1) * factorial(a2))
                buckets[r].append(comp_scale(c, coef))
    xb, tb = _band_targets(buckets, x_band, theta_band)
    comps = []
    for r in range(depth + 1):
        c = comp_add(*buckets[r])
        comps.append(comp_truncate(c, xb, tb, band_tol=band_tol, what=f"adjoint degree {a.order - r}"))
    return Symbol(a.order, tuple(comps))


def symmetrize_symbol(
    a: Symbol,
    depth: int | None = None,
    x_band: int | None = None,
    theta_band: int | None = None,
    band_tol: float | None = DEFAULT_BAND_TOL,
) -> Symbol:
    """Self-adjoint part (a + adj a)/2, exact through the stored depth."""
    adj = adjoint_symbol(a, depth=depth, x_band=x_band, theta_band=theta_band,
                         band_tol=band_tol)
    comps = []
    for k in range(adj.depth + 1):
        c = comp_scale(comp_add(a.components[k], adj.components[k]), 0.5)
        if x_band is not None and theta_band is not None:
            c = comp_truncate(c, x_band, theta_band, band_tol=band_tol,
                              what=f"symmetrize degree {a.order - k}")
        comps.append(c)
    return Symbol(a.order, tuple(comps))


def poisson_bracket(b: HomogeneousComponent, c: HomogeneousComponent) -> HomogeneousComponent:
    """{B, C} = sum_alpha (B_{x^alpha} C_{xi_alpha} - B_{xi_alpha} C_{x^alpha})."""
    if b.cols != c.rows:
        raise DimensionMismatchError("poisson_bracket: incompatible matrix shapes")
    terms = []
    for ax in (0, 1):
        terms.append(comp_mul(comp_dx(b, ax), comp_dxi(c, ax)))
        terms.append(comp_scale(comp_mul(comp_dxi(b, ax), comp_dx(c, ax)), -1.0))
    return comp_add(*terms)


def generalized_bracket(
    b: HomogeneousComponent, c: HomogeneousComponent, d: HomogeneousComponent
) -> HomogeneousComponent:
    """{B, C, D} = sum_alpha (B_{x^alpha} C D_{xi_alpha} - B_{xi_alpha} C D_{x^alpha})."""
    terms = []
    for ax in (0, 1):
        terms.append(comp_mul(comp_mul(comp_dx(b, ax), c), comp_dxi(d, ax)))
        terms.append(comp_scale(comp_mul(comp_mul(comp_dxi(b, ax), c), comp_dx(d, ax)), -1.0))
    return comp_add(*terms)


def subprincipal(a: Symbol) -> HomogeneousComponent:
    """a_{s-1} + (i/2) sum_alpha d^2 a_s / dx^alpha dxi_alpha (left quantization)."""
    if a.depth < 1:
        raise DepthError("subprincipal needs the degree s-1 component")
    corr = comp_add(
        comp_dxi(comp_dx(a.components[0], 0), 0),
        comp_dxi(comp_dx(a.components[0], 1), 1),
    )
    return comp_add(a.components[1], comp_scale(corr, 0.5j))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def symbol_to_bytes(a: Symbol) -> bytes:
    """Versioned binary container (magic SPSYM1, little-endian)."""
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<IIdI", _VERSION, a.m, a.order, a.depth))
    for c in a.components:
        buf.write(struct.pack("<dIIII", c.degree, c.x_band, c.theta_band, c.rows, c.cols))
        buf.write(np.ascontiguousarray(c.coeffs, dtype="<c16").tobytes())
    return buf.getvalue()


def symbol_from_bytes(raw: bytes) -> Symbol:
    buf = io.BytesIO(raw)
    magic = buf.read(6)
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    version, m, order, depth = struct.unpack("<IIdI", buf.read(20))
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    comps = []
    for _ in range(depth + 1):
        degree, xb, tb, rows, cols = struct.unpack("<dIIII", buf.read(24))
        n = (2 * xb + 1) * (2 * xb + 1) * (2 * tb + 1) * rows * cols
        data = np.frombuffer(buf.read(16 * n), dtype="<c16").astype(np.complex128)
        comps.append(
            HomogeneousComponent(degree, data.reshape(2 * xb + 1, 2 * xb + 1, 2 * tb + 1, rows, cols))
        )
    sym = Symbol(order, tuple(comps))
    if sym.m != m:
        raise ValueError("matrix dimension mismatch in container")
    return sym


def symbol_dump(a: Symbol, threshold: float = 1e-12) -> str:
    """Human-readable per-component coefficient table, for diffing."""
    lines = [f"symbol order={a.order:g} m={a.m} depth={a.depth}"]
    for c in a.components:
        lines.append(
            f"component degree={c.degree:g} x_band={c.x_band} theta_band={c.theta_band}"
        )
        xb, tb = c.x_band, c.theta_band
        for i1 in range(c.coeffs.shape[0]):
            for i2 in range(c.coeffs.shape[1]):
                for j in range(c.coeffs.shape[2]):
                    block = c.coeffs[i1, i2, j]
                    if np.max(np.abs(block)) <= threshold:
                        continue
                    for p in range(c.rows):
                        for q in range(c.cols):
                            z = block[p, q]
                            if abs(z) <= threshold:
                                continue
                            lines.append(
                                f"  k=({i1 - xb:+d},{i2 - xb:+d}) n={j - tb:+d} "
                                f"[{p},{q}] = {z.real:+.16e}{z.imag:+.16e}j"
                            )
    return "\n".join(lines) + "\n"
