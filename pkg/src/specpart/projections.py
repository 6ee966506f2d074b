"""Order-zero commuting projections attached to the eigenvalue branches.

The symbols P_j are built order by order from the defining contracts: the
principal part is the eigenprojection field; at each lower degree the unknown
component is forced blockwise, off-diagonal blocks (against the branch under
construction) by the commutation defect with A -- divisible by the eigenvalue
gap, invertible by simplicity -- and the remaining blocks by the idempotency
defect.  A symbol-level symmetrization after each order enforces self-
adjointness exactly.  The per-order norms of the five defect families are
recorded; they certify the construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigenstructure import EigenDecomposition, eigendecompose_principal
from .errors import ComputationError
from .fourier import grid_size
from .quantization import SymbolApplier, lattice_modes, shell_submatrix
from .symbols import (
    DEFAULT_BAND_TOL,
    HomogeneousComponent,
    Symbol,
    adjoint_symbol,
    comp_add,
    comp_from_grid,
    comp_scale,
    compose,
    identity_symbol,
    symbol_linear,
    symmetrize_symbol,
)

DEFAULT_RES_TOL = 1e-8

DEFECT_FAMILIES = ("principal", "adjoint", "product", "partition", "commutator")


@dataclass(frozen=True)
class ResidualRow:
    order: int      # component degree is -order (commutator: A.order - order)
    family: str
    j: int
    l: int          # second index for product rows, 0 otherwise
    norm: float


@dataclass(frozen=True)
class ProjectionSet:
    source: Symbol
    decomp: EigenDecomposition
    indices: tuple
    projections: tuple       # Symbols of order 0, aligned with indices
    residual_log: tuple      # ResidualRow entries
    depth: int
    res_tol: float

    def projection(self, index: int) -> Symbol:
        return self.projections[self.indices.index(index)]

    def max_residual(self) -> float:
        return max((row.norm for row in self.residual_log), default=0.0)

    def residual_table(self) -> list:
        return [
            (row.order, row.family, row.j, row.l, row.norm) for row in self.residual_log
        ]


def _grids(decomp: EigenDecomposition, x_band: int, theta_band: int):
    nx = grid_size(x_band, floor=16)
    nt = grid_size(theta_band, floor=32)
    projs = [f.projector.eval_grid(nx, nt) for f in decomp.fields]
    hs = [f.h.eval_grid(nx, nt)[..., 0, 0].real for f in decomp.fields]
    return nx, nt, projs, hs


def build_projections(
    a: Symbol,
    depth: int,
    decomp: EigenDecomposition | None = None,
    x_band: int | None = None,
    theta_band: int | None = None,
    band_tol: float = DEFAULT_BAND_TOL,
    res_tol: float = DEFAULT_RES_TOL,
    gap_tol: float | None = None,
    validate: bool = True,
) -> ProjectionSet:
    """Construct the m commuting projection symbols of A through degree -depth."""
    if decomp is None:
        decomp = eigendecompose_principal(
            a.principal, gap_tol=gap_tol, x_band=x_band, theta_band=theta_band,
            band_tol=band_tol,
        )
    fields = decomp.fields
    indices = tuple(f.index for f in fields)
    xb = x_band if x_band is not None else max(f.projector.x_band for f in fields)
    tb = theta_band if theta_band is not None else max(f.projector.theta_band for f in fields)
    nx, nt, proj_grids, h_grids = _grids(decomp, xb, tb)

    comps = {j: [decomp.field(j).projector] for j in indices}

    for k in range(1, depth + 1):
        new_comp = {}
        for pos, j in enumerate(indices):
            pj = Symbol(0.0, tuple(comps[j]))
            dd = compose(pj, pj, k, x_band=xb, theta_band=tb,
                         band_tol=band_tol, strict_depth=False)
            e_grid = dd.components[k].eval_grid(nx, nt)
            ap = compose(a, pj, k, x_band=xb, theta_band=tb,
                         band_tol=band_tol, strict_depth=False)
            pa = compose(pj, a, k, x_band=xb, theta_band=tb,
                         band_tol=band_tol, strict_depth=False)
            f_grid = ap.components[k].eval_grid(nx, nt) - pa.components[k].eval_grid(nx, nt)

            x = np.zeros_like(e_grid)
            for lpos in range(len(indices)):
                for rpos in range(len(indices)):
                    pl, pr = proj_grids[lpos], proj_grids[rpos]
                    if lpos == pos and rpos == pos:
                        block = -np.einsum("...ab,...bc,...cd->...ad", pl, e_grid, pr)
                    elif lpos == pos:
                        denom = (h_grids[pos] - h_grids[rpos])[..., None, None]
                        block = -np.einsum("...ab,...bc,...cd->...ad", pl, f_grid, pr) / denom
                    elif rpos == pos:
                        denom = (h_grids[lpos] - h_grids[pos])[..., None, None]
                        block = -np.einsum("...ab,...bc,...cd->...ad", pl, f_grid, pr) / denom
                    else:
                        block = np.einsum("...ab,...bc,...cd->...ad", pl, e_grid, pr)
                    x += block
            new_comp[j] = comp_from_grid(x, -float(k), xb, tb, band_tol=band_tol,
                                         what=f"P_{j} degree -{k}")
        for j in indices:
            comps[j].append(new_comp[j])
            pj = Symbol(0.0, tuple(comps[j]))
            adj_k = adjoint_symbol(pj, depth=k, x_band=xb, theta_band=tb,
                                   band_tol=band_tol).components[k]
            comps[j][k] = comp_scale(comp_add(comps[j][k], adj_k), 0.5)

    projections = tuple(Symbol(0.0, tuple(comps[j])) for j in indices)
    log = _residual_log(a, decomp, indices, projections, depth, xb, tb, band_tol)
    pset = ProjectionSet(
        source=a,
        decomp=decomp,
        indices=indices,
        projections=projections,
        residual_log=tuple(log),
        depth=depth,
        res_tol=res_tol,
    )
    if validate:
        worst = pset.max_residual()
        if worst > res_tol:
            bad = max(log, key=lambda r: r.norm)
            raise ComputationError(
                f"projection defect {bad.family} (j={bad.j}, l={bad.l}, order {bad.order}) "
                f"has norm {bad.norm:.3e} > res_tol={res_tol:.1e}"
            )
    return pset


def _residual_log(a, decomp, indices, projections, depth, xb, tb, band_tol):
    log = []
    ident = identity_symbol(a.m, 0.0, depth)
    by_index = dict(zip(indices, projections))
    for j, pj in by_index.items():
        log.append(ResidualRow(0, "principal", j, 0, comp_add(
            pj.principal, comp_scale(decomp.field(j).projector, -1.0)).norm()))
        adj = adjoint_symbol(pj, depth=depth, x_band=xb, theta_band=tb, band_tol=band_tol)
        diff = symbol_linear([(1.0, pj), (-1.0, adj)])
        for k, c in enumerate(diff.components):
            log.append(ResidualRow(k, "adjoint", j, 0, c.norm()))
        for l, pl in by_index.items():
            prod = compose(pj, pl, depth, x_band=xb, theta_band=tb, band_tol=band_tol)
            target = pj if l == j else None
            diff = symbol_linear([(1.0, prod), (-1.0, target)]) if target else prod
            for k, c in enumerate(diff.components):
                log.append(ResidualRow(k, "product", j, l, c.norm()))
        ap = compose(a, pj, depth, x_band=xb, theta_band=tb, band_tol=band_tol,
                     strict_depth=False)
        pa = compose(pj, a, depth, x_band=xb, theta_band=tb, band_tol=band_tol,
                     strict_depth=False)
        comm = symbol_linear([(1.0, ap), (-1.0, pa)])
        for k, c in enumerate(comm.components):
            log.append(ResidualRow(k, "commutator", j, 0, c.norm()))
    total = symbol_linear([(1.0, p) for p in projections] + [(-1.0, ident)])
    for k, c in enumerate(total.components):
        log.append(ResidualRow(k, "partition", 0, 0, c.norm()))
    return log


def build_Aj(
    a: Symbol,
    pset: ProjectionSet,
    band_tol: float = DEFAULT_BAND_TOL,
) -> dict:
    """Companion operators A_j = A - 2 sum_{l>0, l!=j} P_l* A P_l (positive j).

    Each A_j is symmetrized at the symbol level; its principal part has
    exactly one positive eigenvalue branch, h^(j).
    """
    if pset.decomp.m_plus < 1:
        raise ComputationError("build_Aj needs at least one positive branch")
    depth = a.depth
    positive = [j for j in pset.indices if j > 0]
    xb = max(max(c.x_band for c in p.components) for p in pset.projections)
    tb = max(max(c.theta_band for c in p.components) for p in pset.projections)
    terms = {}
    for l in positive:
        pl = pset.projection(l)
        pl_star = adjoint_symbol(pl, depth=min(depth, pl.depth), x_band=xb,
                                 theta_band=tb, band_tol=band_tol)
        tri = compose(compose(pl_star, a, depth, x_band=xb, theta_band=tb,
                              band_tol=band_tol, strict_depth=False),
                      pl, depth, x_band=xb, theta_band=tb,
                      band_tol=band_tol, strict_depth=False)
        terms[l] = tri
    out = {}
    for j in positive:
        parts = [(1.0, a)] + [(-2.0, terms[l]) for l in positive if l != j]
        aj = symbol_linear(parts)
        out[j] = symmetrize_symbol(aj, x_band=xb, theta_band=tb, band_tol=band_tol)
    return out


@dataclass(frozen=True)
class SignReport:
    rows: tuple     # (j, lam, extreme_rayleigh)
    fitted_c: dict  # j -> max |extreme| * lam^(depth+1-order)
    shell: tuple

    def extreme(self, j: int, lam: int) -> float:
        for jj, ll, v in self.rows:
            if jj == j and ll == lam:
                return v
        raise KeyError((j, lam))


def certify_sign(
    a: Symbol,
    pset: ProjectionSet,
    lams,
    shell: tuple = (0.5, 1.0),
    band_tol: float = DEFAULT_BAND_TOL,
) -> SignReport:
    """Extreme Rayleigh quotients of quantize(P_j* A P_j) on frequency shells.

    For j > 0 the minimum over unit vectors supported on |k| in
    [shell[0]*lam, shell[1]*lam] is reported (should be >= -O(lam^{-(K+1-s)})),
    for j < 0 the maximum.
    """
    lams = [int(l) for l in np.atleast_1d(lams)]
    depth = pset.depth
    rows = []
    fitted = {}
    xb = max(max(c.x_band for c in p.components) for p in pset.projections)
    tb = max(max(c.theta_band for c in p.components) for p in pset.projections)
    for pos, j in enumerate(pset.indices):
        pj = pset.projection(j)
        pj_star = adjoint_symbol(pj, depth=depth, x_band=xb, theta_band=tb,
                                 band_tol=band_tol)
        sj = compose(compose(pj_star, a, depth, x_band=xb, theta_band=tb,
                             band_tol=band_tol, strict_depth=False),
                     pj, depth, x_band=xb, theta_band=tb,
                     band_tol=band_tol, strict_depth=False)
        cj = 0.0
        for lam in lams:
            sub, _ = shell_submatrix(sj, lam, (shell[0] * lam, shell[1] * lam))
            w = np.linalg.eigvalsh(sub)
            extreme = float(w[0]) if j > 0 else float(w[-1])
            rows.append((j, lam, extreme))
            cj = max(cj, abs(extreme) * lam ** (depth + 1 - a.order))
        fitted[j] = cj
    return SignReport(rows=tuple(rows), fitted_c=fitted, shell=shell)


@dataclass(frozen=True)
class DefectDecay:
    lams: tuple
    idempotency: tuple    # max over probe vectors and j of ||(P^2 - P)v||
    orthogonality: tuple  # max over j != l of ||P_j P_l v||
    slope: float


def quantized_defect_decay(
    pset: ProjectionSet,
    lams,
    n_vec: int = 32,
    seed: int = 0,
    pad: int | None = None,
) -> DefectDecay:
    """Idempotency/orthogonality defects of the quantized projections on shells.

    Probe vectors live on the euclidean shell |k| in [lam-1, lam] inside a
    padded lattice, so that lattice-edge clipping cannot masquerade as defect.
    """
    lams = [int(l) for l in np.atleast_1d(lams)]
    xb = max(max(c.x_band for c in p.components) for p in pset.projections)
    pad = 2 * xb + 2 if pad is None else pad
    rng = np.random.default_rng(seed)
    idem, orth = [], []
    for lam in lams:
        lam_q = lam + pad
        appliers = [SymbolApplier(p, lam_q) for p in pset.projections]
        modes = lattice_modes(lam_q)
        r = np.hypot(modes[:, 0], modes[:, 1])
        shell = np.where((r >= lam - 1) & (r <= lam))[0]
        m = pset.source.m
        vecs = np.zeros((len(modes), m, n_vec), dtype=np.complex128)
        draw = rng.standard_normal((len(shell), m, n_vec)) + 1j * rng.standard_normal(
            (len(shell), m, n_vec))
        vecs[shell] = draw
        vecs /= np.linalg.norm(vecs.reshape(-1, n_vec), axis=0)
        worst_idem = 0.0
        worst_orth = 0.0
        pv = [ap.apply(vecs) for ap in appliers]
        for i, ap_i in enumerate(appliers):
            for l in range(len(appliers)):
                out = ap_i.apply(pv[l])
                if i == l:
                    out = out - pv[l]
                    worst_idem = max(worst_idem, float(
                        np.max(np.linalg.norm(out.reshape(-1, n_vec), axis=0))))
                else:
                    worst_orth = max(worst_orth, float(
                        np.max(np.linalg.norm(out.reshape(-1, n_vec), axis=0))))
        idem.append(worst_idem)
        orth.append(worst_orth)
    slope = fit_loglog_slope(np.array(lams, float), np.array(idem))
    return DefectDecay(tuple(lams), tuple(idem), tuple(orth), slope)


def fit_loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log y against log x (y floored at 1e-300)."""
    lx = np.log(np.asarray(x, float))
    ly = np.log(np.maximum(np.asarray(y, float), 1e-300))
    return float(np.polyfit(lx, ly, 1)[0])
