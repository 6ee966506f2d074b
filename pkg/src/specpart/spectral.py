"""Dense Hermitian eigendecomposition, functional calculus, and a result cache.

Eigenvalues within 1e-12 * ||Q|| of zero are treated as exactly zero by the
positive-part machinery: the low-frequency excision creates an exact kernel
that must not leak into counting functions.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CacheCorruptError, CacheMissError, ComputationError
from .quantization import QuantizedOperator

ZERO_TOL_FACTOR = 1e-12

_MAGIC = b"SPREC1"
_VERSION = 1


@dataclass(frozen=True)
class SpectrumRecord:
    eigenvalues: np.ndarray            # sorted ascending
    eigenvectors: np.ndarray | None    # columns aligned with eigenvalues
    trusted_max: float
    source_hash: str
    lam: int
    m: int

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.size else 0.0

    @property
    def zero_tol(self) -> float:
        return ZERO_TOL_FACTOR * self.scale

    def positive(self, trusted_only: bool = False) -> np.ndarray:
        vals = self.eigenvalues[self.eigenvalues > self.zero_tol]
        if trusted_only:
            vals = vals[vals <= self.trusted_max]
        return vals

    def negative(self) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues < -self.zero_tol]


def spectrum(
    q: QuantizedOperator,
    trust_frac: float = 0.45,
    h_min: float = 1.0,
    with_vectors: bool = True,
    check_columns: int = 16,
    seed: int = 0,
) -> SpectrumRecord:
    """Full dense Hermitian eigendecomposition of a quantized operator.

    The trusted window keeps |lambda| <= trust_frac * h_min * lam, the region
    unaffected by lattice truncation; only it enters asymptotic diagnostics.
    """
    herm = q.hermiticity()
    scale = max(float(np.max(np.abs(q.matrix))), 1e-300)
    if herm > 1e-10 * scale:
        raise ComputationError(f"operator is not Hermitian (deviation {herm:.3e})")
    trusted = trust_frac * h_min * q.lam
    key = record_hash(q.source_hash, trust_frac, h_min, with_vectors)
    if with_vectors:
        w, v = scipy.linalg.eigh(q.matrix, driver="evd")
        _validate_pairs(q.matrix, w, v, check_columns, seed)
    else:
        w = scipy.linalg.eigvalsh(q.matrix)
        v = None
    return SpectrumRecord(
        eigenvalues=w, eigenvectors=v, trusted_max=trusted,
        source_hash=key, lam=q.lam, m=q.m,
    )


def _validate_pairs(mat, w, v, n_cols, seed):
    if n_cols <= 0 or v is None:
        return
    rng = np.random.default_rng(seed)
    cols = rng.choice(len(w), size=min(n_cols, len(w)), replace=False)
    res = mat @ v[:, cols] - v[:, cols] * w[cols]
    norm = float(np.max(np.linalg.norm(res, axis=0)))
    scale = max(float(np.max(np.abs(w))), 1e-300)
    if norm > 1e-9 * scale * np.sqrt(len(w)):
        raise ComputationError(f"eigenpair residual {norm:.3e} too large")


def record_hash(source_hash: str, trust_frac: float, h_min: float, with_vectors: bool) -> str:
    h = hashlib.sha256()
    h.update(source_hash.encode())
    h.update(f"|trust={trust_frac!r}|hmin={h_min!r}|vec={int(with_vectors)}".encode())
    return h.hexdigest()


def counting_function(rec: SpectrumRecord, lam: float) -> int:
    """N+(lam): number of eigenvalues with 0 < lambda_k < lam (0 for lam <= 0)."""
    if lam <= 0:
        return 0
    pos = rec.positive()
    return int(np.searchsorted(pos, lam, side="left"))


def matrix_function(rec: SpectrumRecord, f) -> np.ndarray:
    """V f(D) V* for a scalar map f applied to the eigenvalues."""
    if rec.eigenvectors is None:
        raise ComputationError("record stores no eigenvectors")
    fw = np.asarray(f(rec.eigenvalues))
    if not np.all(np.isfinite(fw)):
        raise ComputationError("f is not finite on the spectrum")
    return (rec.eigenvectors * fw) @ rec.eigenvectors.conj().T


def apply_function(rec: SpectrumRecord, f, vecs: np.ndarray) -> np.ndarray:
    """V f(D) V* applied to vectors without forming the full matrix."""
    if rec.eigenvectors is None:
        raise ComputationError("record stores no eigenvectors")
    fw = np.asarray(f(rec.eigenvalues))
    if not np.all(np.isfinite(fw)):
        raise ComputationError("f is not finite on the spectrum")
    coeff = rec.eigenvectors.conj().T @ vecs
    return rec.eigenvectors @ (fw[:, None] * coeff if vecs.ndim == 2 else fw * coeff)


def nonneg_eigenvalues(rec: SpectrumRecord, clip_tol: float = 1e-9) -> np.ndarray:
    """Eigenvalues clipped at zero; error if genuinely negative spectrum."""
    w = rec.eigenvalues
    floor = -clip_tol * max(rec.scale, 1e-300)
    if np.any(w < floor):
        raise ComputationError(
            f"spectrum has negative eigenvalues below the clip tolerance "
            f"(min {float(w.min()):.3e} < {floor:.3e})"
        )
    return np.maximum(w, 0.0)


def theta_part(rec: SpectrumRecord) -> np.ndarray:
    """Spectral projector onto the strictly positive part, theta(Q)."""
    ztol = rec.zero_tol
    return matrix_function(rec, lambda w: (w > ztol).astype(float))


def heat_trace(rec: SpectrumRecord, t: float, trusted_only: bool = False) -> float:
    """Tr theta(Q) e^{-t Q} = sum over positive eigenvalues of e^{-t lambda}."""
    if t <= 0:
        raise ValueError("t must be positive")
    pos = rec.positive(trusted_only=trusted_only)
    return float(np.sum(np.exp(-t * pos)))


# ---------------------------------------------------------------------------
# cache: <cache_root>/<source_hash>.spec, atomic writes, digest-verified reads
# ---------------------------------------------------------------------------

def cache_path(cache_dir: str, key: str) -> str:
    return os.path.join(cache_dir, f"{key}.spec")


def cache_store(rec: SpectrumRecord, cache_dir: str) -> str:
    os.makedirs(cache_dir, exist_ok=True)
    payload = _encode(rec)
    digest = hashlib.sha256(payload).digest()
    path = cache_path(cache_dir, rec.source_hash)
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.write(digest)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def cache_load(key: str, cache_dir: str) -> SpectrumRecord:
    path = cache_path(cache_dir, key)
    if not os.path.exists(path):
        raise CacheMissError(f"no cache entry for {key}")
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 32:
        raise CacheCorruptError(f"cache entry {key} truncated")
    payload, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CacheCorruptError(f"cache entry {key} fails digest verification")
    rec = _decode(payload)
    if rec.source_hash != key:
        raise CacheCorruptError(
            f"cache entry {key} stores record for {rec.source_hash}"
        )
    return rec


def _encode(rec: SpectrumRecord) -> bytes:
    key = rec.source_hash.encode()
    parts = [
        _MAGIC,
        struct.pack("<IQBIId", _VERSION, rec.size, int(rec.eigenvectors is not None),
                    rec.lam, rec.m, rec.trusted_max),
        struct.pack("<H", len(key)),
        key,
        np.ascontiguousarray(rec.eigenvalues, dtype="<f8").tobytes(),
    ]
    if rec.eigenvectors is not None:
        parts.append(np.ascontiguousarray(rec.eigenvectors, dtype="<c16").tobytes())
    return b"".join(parts)


def _decode(payload: bytes) -> SpectrumRecord:
    if payload[:6] != _MAGIC:
        raise CacheCorruptError(f"bad magic {payload[:6]!r}")
    off = 6
    version, n, has_vec, lam, m, trusted = struct.unpack_from("<IQBIId", payload, off)
    off += struct.calcsize("<IQBIId")
    if version != _VERSION:
        raise CacheCorruptError(f"unsupported cache version {version}")
    (klen,) = struct.unpack_from("<H", payload, off)
    off += 2
    key = payload[off:off + klen].decode()
    off += klen
    w = np.frombuffer(payload, dtype="<f8", count=n, offset=off).copy()
    off += 8 * n
    v = None
    if has_vec:
        v = np.frombuffer(payload, dtype="<c16", count=n * n, offset=off).reshape(n, n).copy()
    return SpectrumRecord(
        eigenvalues=w, eigenvectors=v, trusted_max=trusted,
        source_hash=key, lam=lam, m=m,
    )


def cached_spectrum(
    q: QuantizedOperator,
    cache_dir: str | None,
    trust_frac: float = 0.45,
    h_min: float = 1.0,
    with_vectors: bool = True,
) -> tuple:
    """Spectrum with read-through caching; returns (record, from_cache)."""
    key = record_hash(q.source_hash, trust_frac, h_min, with_vectors)
    if cache_dir is not None:
        try:
            return cache_load(key, cache_dir), True
        except CacheMissError:
            pass
    rec = spectrum(q, trust_frac=trust_frac, h_min=h_min, with_vectors=with_vectors)
    if cache_dir is not None:
        cache_store(rec, cache_dir)
    return rec, False
