"""Left quantization of symbols on the truncated Fourier lattice of T^2.

A symbol acts on the span of e^{i k.x} e_p for lattice modes max(|k1|,|k2|)
<= Lambda and components p = 1..m.  The matrix entry is

    M[(k', p), (k, q)] = chi(|k|) * ahat_{pq}(k' - k, k),

with ahat the x-Fourier transform of a(., k) and chi the smooth radial
low-frequency excision (0 for |xi| <= 1/2, 1 for |xi| >= 1).  On the integer
lattice chi only kills the k = 0 block, turning the homogeneous singularity
at xi = 0 into a finite-rank smoothing perturbation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import BandOverflowError, ModelParameterError
from .fourier import mode_range
from .symbols import (
    HomogeneousComponent,
    Symbol,
    component_from_modes,
    compose,
    pad_depth,
    symbol_to_bytes,
    symmetrize_symbol,
    zero_component,
)

EXCISION_DESCRIPTOR = "smoothstep[0.5,1.0]"


def smooth_step(u: np.ndarray) -> np.ndarray:
    """C-infinity step built from exp(-1/u): 0 for u<=0, 1 for u>=1."""
    u = np.asarray(u, dtype=float)
    lo = np.exp(-1.0 / np.clip(u, 1e-300, None), where=u > 0, out=np.zeros_like(u))
    hi = np.exp(-1.0 / np.clip(1.0 - u, 1e-300, None), where=u < 1, out=np.zeros_like(u))
    with np.errstate(invalid="ignore"):
        s = np.where(u <= 0, 0.0, np.where(u >= 1, 1.0, lo / (lo + hi)))
    return s


def excision(r) -> np.ndarray:
    """Radial cutoff chi: 0 for r <= 1/2, 1 for r >= 1, smooth in between."""
    return smooth_step((np.asarray(r, dtype=float) - 0.5) / 0.5)


def lattice_modes(lam: int) -> np.ndarray:
    """Deterministic mode enumeration: k1 slow, k2 fast, each in -lam..lam."""
    k = mode_range(lam)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    return np.stack([k1.ravel(), k2.ravel()], axis=1)


def mode_index(modes_k: np.ndarray, lam: int) -> np.ndarray:
    """Inverse of lattice_modes; -1 for modes outside the lattice."""
    n = 2 * lam + 1
    k1, k2 = modes_k[..., 0], modes_k[..., 1]
    inside = (np.abs(k1) <= lam) & (np.abs(k2) <= lam)
    idx = (k1 + lam) * n + (k2 + lam)
    return np.where(inside, idx, -1)


@dataclass(frozen=True)
class QuantizedOperator:
    matrix: np.ndarray
    lam: int
    m: int
    mode_order: np.ndarray = field(repr=False)
    excision_descriptor: str
    source_hash: str

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def hermiticity(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


def symbol_digest(a: Symbol) -> str:
    return hashlib.sha256(symbol_to_bytes(a)).hexdigest()


def quantization_hash(a: Symbol, lam: int, symmetrize: bool) -> str:
    h = hashlib.sha256()
    h.update(symbol_to_bytes(a))
    h.update(f"|lam={lam}|sym={int(symmetrize)}|chi={EXCISION_DESCRIPTOR}".encode())
    return h.hexdigest()


def _component_tables(a: Symbol, modes: np.ndarray) -> tuple:
    """Sum over components of |k|^deg * angular series, per x-offset.

    Returns (offsets, table) with table[o, s, p, q] the Fourier entry for
    x-offset offsets[o] at source mode modes[s], including the excision.
    """
    m = a.m
    xb = max(c.x_band for c in a.components)
    offs = lattice_modes(xb)
    r = np.hypot(modes[:, 0], modes[:, 1])
    theta = np.arctan2(modes[:, 1], modes[:, 0])
    chi = excision(r)
    table = np.zeros((len(offs), len(modes), m, m), dtype=np.complex128)
    origin = np.where(r == 0)[0]
    for c in a.components:
        nn = mode_range(c.theta_band)
        ang = np.exp(1j * np.outer(theta, nn))  # (modes, n)
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(r > 0, r ** c.degree, 0.0) * chi
        # At k = 0 only the angular mean of the degree-0 part has a
        # well-defined value; everything homogeneous is excised there.
        if len(origin) and c.degree == 0.0:
            radial[origin] = 1.0
            ang[origin] = 0.0
            ang[origin, c.theta_band] = 1.0
        # per offset in this component's band: contract angular modes
        for i1, k1 in enumerate(mode_range(c.x_band)):
            for i2, k2 in enumerate(mode_range(c.x_band)):
                block = c.coeffs[i1, i2]  # (2T+1, m, m)
                if not np.any(block):
                    continue
                o = (k1 + xb) * (2 * xb + 1) + (k2 + xb)
                vals = np.einsum("sn,npq->spq", ang, block)
                table[o] += radial[:, None, None] * vals
    return offs, table


def quantize(a: Symbol, lam: int, symmetrize: bool = True) -> QuantizedOperator:
    """Dense Hermitian realization at Fourier cutoff lam."""
    if lam < 4:
        raise ValueError("lam must be at least 4")
    xb = max(c.x_band for c in a.components)
    if xb > 2 * lam:
        raise BandOverflowError(f"x-band {xb} exceeds representable offset 2*lam={2 * lam}")
    m = a.m
    modes = lattice_modes(lam)
    nmodes = len(modes)
    offs, table = _component_tables(a, modes)
    mat = np.zeros((nmodes * m, nmodes * m), dtype=np.complex128)
    src = np.arange(nmodes)
    for o, (o1, o2) in enumerate(offs):
        tgt = mode_index(modes + np.array([o1, o2]), lam)
        ok = tgt >= 0
        if not np.any(ok):
            continue
        rows = tgt[ok]
        cols = src[ok]
        blocks = table[o][ok]
        for p in range(m):
            for q in range(m):
                mat[rows * m + p, cols * m + q] += blocks[:, p, q]
    if symmetrize:
        mat = 0.5 * (mat + mat.conj().T)
    return QuantizedOperator(
        matrix=mat,
        lam=lam,
        m=m,
        mode_order=modes,
        excision_descriptor=EXCISION_DESCRIPTOR,
        source_hash=quantization_hash(a, lam, symmetrize),
    )


_QOP_MAGIC = b"SPQOP1"
_QOP_VERSION = 1


def qop_to_bytes(q: QuantizedOperator) -> bytes:
    """Matrix dump: magic SPQOP1, lam, m, mode table, column-major entries."""
    import io
    import struct

    buf = io.BytesIO()
    buf.write(_QOP_MAGIC)
    key = q.source_hash.encode()
    buf.write(struct.pack("<IIIH", _QOP_VERSION, q.lam, q.m, len(key)))
    buf.write(key)
    buf.write(np.ascontiguousarray(q.mode_order, dtype="<i4").tobytes())
    buf.write(np.asfortranarray(q.matrix, dtype="<c16").tobytes(order="F"))
    return buf.getvalue()


def qop_from_bytes(raw: bytes) -> QuantizedOperator:
    import struct

    if raw[:6] != _QOP_MAGIC:
        raise ValueError(f"bad magic {raw[:6]!r}")
    off = 6
    version, lam, m, klen = struct.unpack_from("<IIIH", raw, off)
    off += struct.calcsize("<IIIH")
    if version != _QOP_VERSION:
        raise ValueError(f"unsupported version {version}")
    key = raw[off:off + klen].decode()
    off += klen
    nmodes = (2 * lam + 1) ** 2
    modes = np.frombuffer(raw, dtype="<i4", count=2 * nmodes, offset=off).reshape(nmodes, 2).copy()
    off += 8 * nmodes
    n = nmodes * m
    mat = np.frombuffer(raw, dtype="<c16", count=n * n, offset=off).reshape((n, n), order="F").copy()
    return QuantizedOperator(matrix=mat, lam=lam, m=m, mode_order=modes,
                             excision_descriptor=EXCISION_DESCRIPTOR, source_hash=key)


class SymbolApplier:
    """Matrix-free action of quantize(a, lam, symmetrize=False) on mode vectors.

    Vectors are arrays of shape (nmodes, m) or (nmodes, m, nvec).  Useful for
    high-frequency defect diagnostics on padded lattices where dense storage
    would be wasteful.
    """

    def __init__(self, a: Symbol, lam: int):
        if lam < 4:
            raise ValueError("lam must be at least 4")
        self.lam = lam
        self.m = a.m
        self.modes = lattice_modes(lam)
        self.offsets, self.table = _component_tables(a, self.modes)
        self.targets = []
        for o1, o2 in self.offsets:
            tgt = mode_index(self.modes + np.array([o1, o2]), lam)
            self.targets.append(tgt)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        single = vec.ndim == 2
        v = vec[..., None] if single else vec
        out = np.zeros_like(v)
        for o in range(len(self.offsets)):
            tgt = self.targets[o]
            ok = tgt >= 0
            if not np.any(ok):
                continue
            contrib = np.einsum("spq,sqv->spv", self.table[o][ok], v[ok])
            # targets are unique within one offset, so fancy += is safe
            out[tgt[ok]] += contrib
        return out[..., 0] if single else out


def shell_submatrix(a: Symbol, lam: int, radii: np.ndarray, symmetrize: bool = True) -> tuple:
    """Entries of the quantization restricted to modes with |k| in [r0, r1].

    Rayleigh quotients of the full operator over vectors supported on the
    shell only need this principal submatrix.
    """
    r0, r1 = radii
    modes = lattice_modes(lam)
    rr = np.hypot(modes[:, 0], modes[:, 1])
    sel = np.where((rr >= r0) & (rr <= r1))[0]
    if len(sel) == 0:
        raise ValueError(f"no lattice modes with |k| in [{r0}, {r1}]")
    m = a.m
    offs, table = _component_tables(a, modes)
    pos_of_mode = -np.ones(len(modes), dtype=int)
    pos_of_mode[sel] = np.arange(len(sel))
    sub = np.zeros((len(sel) * m, len(sel) * m), dtype=np.complex128)
    for o, (o1, o2) in enumerate(offs):
        tgt = mode_index(modes[sel] + np.array([o1, o2]), lam)
        ok = tgt >= 0
        if not np.any(ok):
            continue
        tpos = np.where(ok, pos_of_mode[np.clip(tgt, 0, None)], -1)
        ok &= tpos >= 0
        if not np.any(ok):
            continue
        rows = tpos[ok]
        cols = np.arange(len(sel))[ok]
        blocks = table[o][sel][ok]
        for p in range(m):
            for q in range(m):
                sub[rows * m + p, cols * m + q] += blocks[:, p, q]
    if symmetrize:
        sub = 0.5 * (sub + sub.conj().T)
    return sub, modes[sel]


# ---------------------------------------------------------------------------
# model gallery
# ---------------------------------------------------------------------------

MODEL_NAMES = (
    "diag_multiplier",
    "dirac2d",
    "two_speed",
    "two_speed_perturbed",
    "second_order_nonneg",
)

_SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def _two_speed_principal(eps: float) -> HomogeneousComponent:
    # (3/2)|xi| Id + (1/2)(xi_1 sigma3 + xi_2 sigma1) + eps sin(x1) |xi| sigma1
    eye = np.eye(2, dtype=complex)
    entries = {
        (0, 0, 0): 1.5 * eye,
        (0, 0, 1): 0.5 * (_SIGMA3 - 1j * _SIGMA1) / 2.0,
        (0, 0, -1): 0.5 * (_SIGMA3 + 1j * _SIGMA1) / 2.0,
    }
    comp = component_from_modes(1.0, entries, 1, 1, 2, 2)
    if eps:
        pert = component_from_modes(
            1.0,
            {(1, 0, 0): eps * _SIGMA1 / 2j, (-1, 0, 0): -eps * _SIGMA1 / 2j},
            1, 1, 2, 2,
        )
        comp = HomogeneousComponent(1.0, comp.coeffs + pert.coeffs)
    return comp


def model_operator(name: str, depth: int = 3, **params) -> Symbol:
    """Self-adjoint-symmetrized elliptic model symbols with simple eigenvalues.

    diag_multiplier:      diag(speeds) * |xi|           (x-independent)
    dirac2d:              xi_1 sigma3 + xi_2 sigma1     (h = +-|xi|)
    two_speed:            (3/2)|xi| + (1/2) xi.sigma    (h = |xi|, 2|xi|)
    two_speed_perturbed:  two_speed + eps sin(x1)|xi| sigma1
    second_order_nonneg:  operator square of two_speed_perturbed(eps)
    """
    if name == "diag_multiplier":
        speeds = tuple(params.pop("speeds", (1.0, 2.0)))
        if params:
            raise ModelParameterError(f"unknown parameters {sorted(params)} for {name}")
        if len(set(speeds)) != len(speeds) or any(s == 0 for s in speeds):
            raise ModelParameterError("speeds must be distinct and nonzero")
        m = len(speeds)
        comp = component_from_modes(1.0, {(0, 0, 0): np.diag(speeds)}, 0, 0, m, m)
        return pad_depth(Symbol(1.0, (comp,)), depth)
    if name == "dirac2d":
        if params:
            raise ModelParameterError(f"unknown parameters {sorted(params)} for {name}")
        entries = {
            (0, 0, 1): (_SIGMA3 - 1j * _SIGMA1) / 2.0,
            (0, 0, -1): (_SIGMA3 + 1j * _SIGMA1) / 2.0,
        }
        comp = component_from_modes(1.0, entries, 0, 1, 2, 2)
        return pad_depth(Symbol(1.0, (comp,)), depth)
    if name in ("two_speed", "two_speed_perturbed"):
        eps = float(params.pop("eps", 0.1 if name == "two_speed_perturbed" else 0.0))
        if params:
            raise ModelParameterError(f"unknown parameters {sorted(params)} for {name}")
        if name == "two_speed":
            eps = 0.0
        # unperturbed gap is |xi|; pointwise perturbation bound keeps it positive
        if not 0 <= eps < 0.5:
            raise ModelParameterError(
                f"eps={eps} out of range: need eps < gap/2 = 0.5 to keep the eigenvalue gap positive"
            )
        comp = _two_speed_principal(eps)
        sym = pad_depth(Symbol(1.0, (comp,)), depth)
        return symmetrize_symbol(sym) if eps else sym
    if name == "second_order_nonneg":
        eps = float(params.pop("eps", 0.0))
        if params:
            raise ModelParameterError(f"unknown parameters {sorted(params)} for {name}")
        first = model_operator("two_speed_perturbed", depth=depth, eps=eps)
        xb = 2 * max(c.x_band for c in first.components)
        tb = 2 * max(c.theta_band for c in first.components) + depth
        return compose(first, first, depth, x_band=xb, theta_band=tb)
    raise ModelParameterError(f"unknown model {name!r}; known: {MODEL_NAMES}")


def model_field_bands(name: str, eps: float = 0.0) -> tuple:
    """Recommended bands for eigenvalue/eigenprojection fields of a model."""
    if name == "diag_multiplier":
        return (0, 0)
    if name in ("dirac2d",):
        return (0, 2)
    if name in ("two_speed", "two_speed_perturbed", "second_order_nonneg"):
        return (14, 24) if eps else (0, 2)
    raise ModelParameterError(f"unknown model {name!r}")
