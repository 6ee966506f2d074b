"""Eigenvalue and eigenprojection fields of an elliptic Hermitian principal symbol.

Pointwise eigenproblems are solved on the Fourier sample grid at |xi| = 1 and
the results are transformed back to banded coefficients.  Projections (outer
products of eigenvectors) are returned instead of eigenvectors, which keeps
the fields gauge-free and smooth.  Branches are labeled by value ordering;
this is a global labeling because simple eigenvalues never cross.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EllipticityError, SimplicityError
from .fourier import grid_size
from .symbols import (
    DEFAULT_BAND_TOL,
    HomogeneousComponent,
    comp_from_grid,
)

DEFAULT_GAP_TOL_FACTOR = 1e-3


@dataclass(frozen=True)
class EigenField:
    """One eigenvalue branch of the principal symbol.

    index follows the signed convention: j = 1..m_plus for positive branches
    in increasing order, j = -m_minus..-1 for negative ones.
    """

    index: int
    h: HomogeneousComponent          # scalar, homogeneous of the symbol order
    projector: HomogeneousComponent  # m x m, homogeneous of degree 0
    gap: float                       # min distance to the nearest other branch at |xi|=1

    @property
    def m(self) -> int:
        return self.projector.rows


@dataclass(frozen=True)
class EigenDecomposition:
    fields: tuple
    h_min: float      # min over grid and branches of |h| at |xi|=1
    gap: float        # global minimal gap
    m_plus: int
    m_minus: int

    def field(self, index: int) -> EigenField:
        for f in self.fields:
            if f.index == index:
                return f
        raise KeyError(f"no eigenfield with index {index}")

    @property
    def positive(self) -> tuple:
        return tuple(f for f in self.fields if f.index > 0)

    @property
    def negative(self) -> tuple:
        return tuple(f for f in self.fields if f.index < 0)


def _signed_indices(m_minus: int, m: int) -> list:
    return [i - m_minus if i < m_minus else i - m_minus + 1 for i in range(m)]


def eigendecompose_principal(
    a_prin: HomogeneousComponent,
    gap_tol: float | None = None,
    x_band: int | None = None,
    theta_band: int | None = None,
    band_tol: float = DEFAULT_BAND_TOL,
    herm_tol: float = 1e-10,
) -> EigenDecomposition:
    """Eigenvalue fields h^(j) and eigenprojection fields P^(j) of a_prin.

    x_band / theta_band set the bands of the output fields (default: the
    input bands, which is exact only when the symbol is x-independent or
    diagonal; smooth perturbed models need wider bands).
    """
    m = a_prin.rows
    if a_prin.cols != m:
        raise DimensionMismatchError("principal symbol must be square")
    x_band = a_prin.x_band if x_band is None else x_band
    theta_band = a_prin.theta_band if theta_band is None else theta_band
    nx = grid_size(x_band, floor=16)
    ntheta = grid_size(theta_band, floor=32)
    grid = a_prin.eval_grid(nx, ntheta)

    herm_dev = float(np.max(np.abs(grid - np.conj(np.swapaxes(grid, -1, -2)))))
    scale = max(float(np.max(np.abs(grid))), 1e-300)
    if herm_dev > herm_tol * scale:
        raise EllipticityError(
            f"principal symbol is not Hermitian on the grid (deviation {herm_dev:.3e})"
        )
    grid = 0.5 * (grid + np.conj(np.swapaxes(grid, -1, -2)))

    w, v = np.linalg.eigh(grid)  # ascending eigenvalues per point

    h_abs_min = float(np.min(np.abs(w)))
    if h_abs_min <= 1e-12 * scale:
        raise EllipticityError(
            f"principal symbol is singular on the grid (min |h| = {h_abs_min:.3e})"
        )

    if m > 1:
        gaps = np.diff(w, axis=-1)
        gap = float(np.min(gaps))
    else:
        gap = float("inf")
    h_max = float(np.max(np.abs(w)))
    if gap_tol is None:
        gap_tol = DEFAULT_GAP_TOL_FACTOR * h_max
    if gap <= gap_tol:
        flat = np.argmin(np.diff(w, axis=-1).min(axis=-1)) if m > 1 else 0
        i1, i2, i3 = np.unravel_index(flat, grid.shape[:3])
        raise SimplicityError(
            "eigenvalue simplicity violated at "
            f"(x=({2 * np.pi * i1 / nx:.3f},{2 * np.pi * i2 / nx:.3f}), "
            f"theta={2 * np.pi * i3 / ntheta:.3f}): gap {gap:.3e} <= gap_tol {gap_tol:.3e}"
        )

    signs = np.sign(w)
    if np.any(signs.min(axis=(0, 1, 2)) != signs.max(axis=(0, 1, 2))):
        raise EllipticityError("an eigenvalue branch changes sign across the grid")
    branch_signs = signs[0, 0, 0, :]
    m_minus = int(np.sum(branch_signs < 0))
    m_plus = m - m_minus
    indices = _signed_indices(m_minus, m)

    fields = []
    for i, j in enumerate(indices):
        proj = np.einsum("...p,...q->...pq", v[..., :, i], np.conj(v[..., :, i]))
        h_i = w[..., i][..., None, None].astype(np.complex128)
        branch_gap = float("inf")
        if m > 1:
            others = np.concatenate([w[..., :i], w[..., i + 1:]], axis=-1)
            branch_gap = float(np.min(np.abs(others - w[..., i][..., None])))
        fields.append(
            EigenField(
                index=j,
                h=comp_from_grid(h_i, a_prin.degree, x_band, theta_band,
                                 band_tol=band_tol, what=f"h^({j})"),
                projector=comp_from_grid(proj, 0.0, x_band, theta_band,
                                         band_tol=band_tol, what=f"P^({j})"),
                gap=branch_gap,
            )
        )
    return EigenDecomposition(
        fields=tuple(fields), h_min=h_abs_min, gap=gap, m_plus=m_plus, m_minus=m_minus
    )


def verify_projection_partition(
    decomp: EigenDecomposition,
    a_prin: HomogeneousComponent | None = None,
    nx: int | None = None,
    ntheta: int | None = None,
) -> dict:
    """Pointwise partition-of-unity / orthogonality report (the degree-0 shadow).

    Returns max deviations; never raises.
    """
    fields = decomp.fields
    m = fields[0].m
    xb = max(f.projector.x_band for f in fields)
    tb = max(f.projector.theta_band for f in fields)
    nx = nx or grid_size(2 * xb, floor=16)
    ntheta = ntheta or grid_size(2 * tb, floor=32)
    projs = [f.projector.eval_grid(nx, ntheta) for f in fields]
    hs = [f.h.eval_grid(nx, ntheta)[..., 0, 0] for f in fields]

    eye = np.eye(m)
    total = sum(projs)
    report = {
        "sum_identity": float(np.max(np.abs(total - eye))),
        "idempotency": 0.0,
        "orthogonality": 0.0,
        "hermiticity": 0.0,
        "trace_one": 0.0,
        "reconstruction": None,
    }
    for i, p in enumerate(projs):
        report["idempotency"] = max(
            report["idempotency"],
            float(np.max(np.abs(np.einsum("...ab,...bc->...ac", p, p) - p))),
        )
        report["hermiticity"] = max(
            report["hermiticity"],
            float(np.max(np.abs(p - np.conj(np.swapaxes(p, -1, -2))))),
        )
        report["trace_one"] = max(
            report["trace_one"],
            float(np.max(np.abs(np.trace(p, axis1=-2, axis2=-1) - 1.0))),
        )
        for l, q in enumerate(projs):
            if l == i:
                continue
            report["orthogonality"] = max(
                report["orthogonality"],
                float(np.max(np.abs(np.einsum("...ab,...bc->...ac", p, q)))),
            )
    if a_prin is not None:
        recon = sum(h[..., None, None] * p for h, p in zip(hs, projs))
        target = a_prin.eval_grid(nx, ntheta)
        report["reconstruction"] = float(np.max(np.abs(recon - target)))
    return report
