"""Partition of the positive spectrum into branch series.

Implements the semi-axis partition nu_n = n^beta + c_n / n with
beta = 1/(1 + alpha d / s), the count-matching determination of the
enumeration shift r_alpha, eigenfunction classification by projection mass,
the max-norm Gram orthonormalizer, the cluster counting bound, and the
finite-dimensional simultaneous-diagonalization oracle that motivates the
whole construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisError
from .projections import fit_loglog_slope
from .spectral import SpectrumRecord

C_SCAN_POINTS = 65


# ---------------------------------------------------------------------------
# semi-axis partition
# ---------------------------------------------------------------------------

def partition_exponents(alpha: float, s: float, d: float) -> tuple:
    """beta = 1/(1 + alpha d / s) and gamma = 1 + d beta / s."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    beta = 1.0 / (1.0 + alpha * d / s)
    gamma = 1.0 + d * beta / s
    return beta, gamma


@dataclass(frozen=True)
class SemiAxisPartition:
    alpha: float
    s: float
    d: float
    beta: float
    gamma: float
    nu: np.ndarray        # nu_0 = 0, nu_n = n^beta + c_n / n
    c: np.ndarray         # chosen offsets, |c_n| <= beta / 4
    dist: np.ndarray      # distance of nu_n to the merged eigenvalue set (n >= 1)
    empirical_c: float    # min_n n^gamma * dist_n

    def interval_of(self, x: np.ndarray) -> np.ndarray:
        """Index n with x in (nu_n, nu_{n+1}]; -1 below nu_0, len-1 above."""
        return np.searchsorted(self.nu, x, side="left") - 1

    def length_fit_exponent(self, lo_frac: float = 0.33, bins: int = 12) -> float:
        """Binned log-log fit of nu_{n+1} - nu_n against nu_n.

        c_n flips between scan-window edges inject jitter; bin medians keep
        the fit on the n^(beta-1) trend (target exponent -alpha d / s).
        """
        n0 = max(2, int(len(self.nu) * lo_frac))
        lengths = np.diff(self.nu)[n0:]
        mids = self.nu[n0:-1]
        lx, ly = np.log(mids), np.log(lengths)
        edges = np.linspace(lx.min(), lx.max(), bins + 1)
        bx, by = [], []
        for i in range(bins):
            sel = (lx >= edges[i]) & (lx <= edges[i + 1])
            if np.any(sel):
                bx.append(np.median(lx[sel]))
                by.append(np.median(ly[sel]))
        return float(np.polyfit(bx, by, 1)[0])


def build_semiaxis_partition(
    alpha: float,
    s: float,
    d: float,
    eigenvalues: np.ndarray,
    n_max: int,
    scan_points: int = C_SCAN_POINTS,
) -> SemiAxisPartition:
    """Choose each c_n on a deterministic scan grid in [-beta/4, beta/4]
    maximizing the distance from nu_n to the merged eigenvalue set."""
    beta, gamma = partition_exponents(alpha, s, d)
    evs = np.sort(np.asarray(eigenvalues, dtype=float))
    scan = np.linspace(-beta / 4.0, beta / 4.0, scan_points)
    nu = np.zeros(n_max + 1)
    c = np.zeros(n_max + 1)
    dist = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        cand = n ** beta + scan / n
        pos = np.searchsorted(evs, cand)
        right = evs[np.minimum(pos, len(evs) - 1)]
        left = evs[np.maximum(pos - 1, 0)]
        dists = np.minimum(np.abs(cand - left), np.abs(cand - right))
        best = int(np.argmax(dists))
        nu[n] = cand[best]
        c[n] = scan[best]
        dist[n] = dists[best]
    ns = np.arange(1, n_max + 1, dtype=float)
    empirical_c = float(np.min(ns ** gamma * dist[1:]))
    return SemiAxisPartition(
        alpha=alpha, s=s, d=d, beta=beta, gamma=gamma,
        nu=nu, c=c, dist=dist, empirical_c=empirical_c,
    )


# ---------------------------------------------------------------------------
# eigenfunction classification by projection mass
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassificationReport:
    k: np.ndarray              # indices into the positive spectrum (0-based)
    eigenvalue: np.ndarray
    label: np.ndarray          # branch index j > 0 with maximal mass
    dominance: np.ndarray      # ||P_label u_k||^2
    negative_mass: np.ndarray  # sum over j < 0 of ||P_j u_k||^2
    unclassifiable: np.ndarray # bool: max_j ||P_j u_k|| < 1/(m_plus + 1)


def classify_eigenfunctions(
    rec: SpectrumRecord,
    projections: dict,
    trusted_only: bool = True,
) -> ClassificationReport:
    """Label positive-spectrum eigenfunctions by dominant projection mass.

    `projections` maps signed branch index to the quantized projection
    matrix (same lattice and excision as the record).
    """
    if rec.eigenvectors is None:
        raise HypothesisError("classification needs eigenvectors")
    w = rec.eigenvalues
    sel = np.where(w > rec.zero_tol)[0]
    if trusted_only:
        sel = sel[w[sel] <= rec.trusted_max]
    vecs = rec.eigenvectors[:, sel]
    masses = {}
    for j, pq in projections.items():
        mat = pq.matrix if hasattr(pq, "matrix") else pq
        masses[j] = np.sum(np.abs(mat @ vecs) ** 2, axis=0)
    pos_idx = sorted(j for j in masses if j > 0)
    neg_idx = sorted(j for j in masses if j < 0)
    stack = np.stack([masses[j] for j in pos_idx], axis=0)
    best = np.argmax(stack, axis=0)
    label = np.array([pos_idx[b] for b in best])
    dominance = stack[best, np.arange(stack.shape[1])]
    negative_mass = (
        np.sum(np.stack([masses[j] for j in neg_idx], axis=0), axis=0)
        if neg_idx else np.zeros(stack.shape[1])
    )
    m_plus = len(pos_idx)
    unclassifiable = np.sqrt(dominance) < 1.0 / (m_plus + 1)
    return ClassificationReport(
        k=sel, eigenvalue=w[sel], label=label, dominance=dominance,
        negative_mass=negative_mass, unclassifiable=unclassifiable,
    )


# ---------------------------------------------------------------------------
# series matching: the enumeration shift r_alpha
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchReport:
    r_alpha: int
    candidates: tuple          # shifts from all count-matched nonempty intervals
    stabilization_n: int       # first n with three consecutive matching counts
    mismatch_after: tuple      # interval indices with count mismatch after that
    k: np.ndarray              # 0-based indices of matched lambda_k (trusted)
    lam: np.ndarray
    mu: np.ndarray             # mu_{k + r_alpha}
    residual: np.ndarray       # |lambda_k - mu_{k + r_alpha}|
    partition: SemiAxisPartition = field(repr=False)

    def residual_slope(self, bins: int = 10, lo_frac: float = 0.1) -> float:
        """Binned log-log slope of the residual against the index k."""
        kk = self.k.astype(float) + 1.0
        res = np.maximum(self.residual, 1e-300)
        sel = kk >= max(2.0, lo_frac * kk.max())
        lx, ly = np.log(kk[sel]), np.log(res[sel])
        edges = np.linspace(lx.min(), lx.max(), bins + 1)
        bx, by = [], []
        for i in range(bins):
            s = (lx >= edges[i]) & (lx <= edges[i + 1])
            if np.any(s):
                bx.append(np.median(lx[s]))
                by.append(np.median(ly[s]))
        return float(np.polyfit(bx, by, 1)[0])


def one_sided_distances(values: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """dist(v, set(targets)) for each v."""
    t = np.sort(np.asarray(targets, dtype=float))
    pos = np.searchsorted(t, values)
    right = t[np.minimum(pos, len(t) - 1)]
    left = t[np.maximum(pos - 1, 0)]
    return np.minimum(np.abs(values - left), np.abs(values - right))


def merge_positive_spectra(records) -> np.ndarray:
    """Union with multiplicity of the positive spectra, sorted ascending."""
    return np.sort(np.concatenate([r.positive() for r in records]))


def match_series(
    rec_a: SpectrumRecord,
    records_aj: dict,
    alpha: float,
    s: float,
    d: float,
    n_max: int | None = None,
    stabilization_run: int = 3,
) -> MatchReport:
    """Count-matching determination of the shift r with lambda_k ~ mu_{k+r}.

    The partition intervals are scanned from low frequency; once
    `stabilization_run` consecutive intervals hold equally many lambda's and
    mu's, the shift is fixed from the first nonempty matched interval, per
    the counting argument.  All later candidate shifts are surfaced, and any
    later count mismatch inside the trusted window is reported rather than
    silently ignored.
    """
    lam_all = rec_a.positive()
    mu_all = merge_positive_spectra(records_aj.values())
    trusted = rec_a.trusted_max
    merged = np.concatenate([lam_all, mu_all])
    beta, _ = partition_exponents(alpha, s, d)
    if n_max is None:
        n_max = int(np.ceil((0.9 * trusted) ** (1.0 / beta)))
        n_max = min(max(n_max, 50), 5000)
    part = build_semiaxis_partition(alpha, s, d, merged, n_max)
    nu = part.nu

    counts_lam = np.diff(np.searchsorted(lam_all, nu, side="right"))
    counts_mu = np.diff(np.searchsorted(mu_all, nu, side="right"))
    match = counts_lam == counts_mu

    stab = -1
    for n in range(1, len(match) - stabilization_run + 1):
        if all(match[n + i] for i in range(stabilization_run)):
            stab = n
            break
    if stab < 0:
        raise HypothesisError(
            "count matching failed: no run of "
            f"{stabilization_run} matching intervals; first mismatch at "
            f"interval {int(np.argmin(match)) + 1}"
        )

    candidates = []
    mismatches = []
    for n in range(stab, len(nu) - 1):
        if nu[n] > trusted:
            break
        if not match[n]:
            mismatches.append(n)
            continue
        if counts_lam[n] == 0:
            continue
        k1 = int(np.searchsorted(lam_all, nu[n], side="right"))
        k2 = int(np.searchsorted(mu_all, nu[n], side="right"))
        candidates.append(k2 - k1)
    if not candidates:
        raise HypothesisError("count matching failed: no nonempty matched interval")
    r = candidates[0]

    k_hi = int(np.searchsorted(lam_all, trusted, side="right"))
    ks = np.arange(k_hi)
    ok = (ks + r >= 0) & (ks + r < len(mu_all))
    ks = ks[ok]
    lam = lam_all[ks]
    mu = mu_all[ks + r]
    return MatchReport(
        r_alpha=int(r),
        candidates=tuple(dict.fromkeys(candidates)),
        stabilization_n=stab,
        mismatch_after=tuple(mismatches),
        k=ks, lam=lam, mu=mu, residual=np.abs(lam - mu),
        partition=part,
    )


@dataclass(frozen=True)
class DistanceStats:
    per_branch: dict    # j -> max dist(lambda^(j)_k, sigma+(A)) over top half
    merged: float       # max dist(lambda_k, union sigma+(A_j)) over top half
    window: tuple


def distance_stats(rec_a: SpectrumRecord, records_aj: dict) -> DistanceStats:
    """Two-sided spectral distance maxima over the top half of the trusted window."""
    trusted = rec_a.trusted_max
    lo, hi = trusted / 2.0, trusted
    lam = rec_a.positive()
    lam_w = lam[(lam > lo) & (lam <= hi)]
    mu_all = merge_positive_spectra(records_aj.values())
    per = {}
    for j, rec in records_aj.items():
        vals = rec.positive()
        vals = vals[(vals > lo) & (vals <= hi)]
        per[j] = float(np.max(one_sided_distances(vals, lam))) if len(vals) else 0.0
    merged = float(np.max(one_sided_distances(lam_w, mu_all))) if len(lam_w) else 0.0
    return DistanceStats(per_branch=per, merged=merged, window=(lo, hi))


# ---------------------------------------------------------------------------
# max-norm Gram orthonormalizer
# ---------------------------------------------------------------------------

def gram_orthonormalize(f: np.ndarray, term_tol: float = 1e-16) -> np.ndarray:
    """Hermitian G with G F G = I via the binomial series for F^(-1/2).

    Requires ||F - I||_max <= 1/(3 r^2); then ||G - I||_max <= ||F - I||_max.
    The series is truncated when a term's max-norm falls below term_tol.
    """
    f = np.asarray(f, dtype=np.complex128)
    r = f.shape[0]
    if f.shape != (r, r):
        raise ValueError("F must be square")
    if np.max(np.abs(f - f.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(f))):
        raise HypothesisError("F is not Hermitian")
    rmat = f - np.eye(r)
    dev = float(np.max(np.abs(rmat)))
    bound = 1.0 / (3.0 * r * r)
    if dev > bound:
        raise HypothesisError(
            f"||F - I||_max = {dev:.3e} exceeds the 1/(3 r^2) = {bound:.3e} hypothesis"
        )
    g = np.eye(r, dtype=np.complex128)
    term = np.eye(r, dtype=np.complex128)
    coef = 1.0
    for k in range(1, 2000):
        coef *= -(0.5 + (k - 1)) / k  # binom(-1/2, k) recursion, sign folded in
        term = term @ rmat
        g = g + coef * term
        if coef != 0 and float(np.max(np.abs(term))) * abs(coef) < term_tol:
            break
    return 0.5 * (g + g.conj().T)


def inverse_sqrt_oracle(f: np.ndarray) -> np.ndarray:
    """Direct eigendecomposition inverse square root (the independent route)."""
    w, v = np.linalg.eigh(f)
    if np.any(w <= 0):
        raise HypothesisError("F is not positive definite")
    return (v / np.sqrt(w)) @ v.conj().T


# ---------------------------------------------------------------------------
# cluster counting bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterVerdict:
    ok: bool
    count: int
    required: int
    interval: tuple
    measured_eps: float


def cluster_count_bound(
    mu: np.ndarray,
    u: np.ndarray,
    rec: SpectrumRecord,
    eps: float,
    ortho_tol: float = 1e-10,
) -> ClusterVerdict:
    """If ||(A - mu_k) u_k|| <= eps for an orthonormal set, the interval
    [mu_1 - sqrt(r) eps, mu_r + sqrt(r) eps] holds at least r eigenvalues.

    Both hypotheses are measured (not assumed); violations raise.
    """
    mu = np.sort(np.asarray(mu, dtype=float))
    r = len(mu)
    if u.shape[1] != r:
        raise ValueError("need one column per mu_k")
    gram = u.conj().T @ u
    ortho_dev = float(np.max(np.abs(gram - np.eye(r))))
    if ortho_dev > ortho_tol:
        raise HypothesisError(f"columns not orthonormal (deviation {ortho_dev:.3e})")
    if rec.eigenvectors is None:
        raise HypothesisError("record stores no eigenvectors")
    au = rec.eigenvectors @ (rec.eigenvalues[:, None] * (rec.eigenvectors.conj().T @ u))
    res = np.linalg.norm(au - u * mu[None, :], axis=0)
    measured = float(np.max(res))
    if measured > eps:
        raise HypothesisError(
            f"residual hypothesis fails: max ||(A - mu_k) u_k|| = {measured:.3e} > eps = {eps:.3e}"
        )
    pad = np.sqrt(r) * eps
    lo, hi = mu[0] - pad, mu[-1] + pad
    count = int(np.sum((rec.eigenvalues >= lo) & (rec.eigenvalues <= hi)))
    return ClusterVerdict(ok=count >= r, count=count, required=r,
                          interval=(lo, hi), measured_eps=measured)


# ---------------------------------------------------------------------------
# finite-dimensional simultaneous-diagonalization oracle
# ---------------------------------------------------------------------------

def positive_window_projector(a: np.ndarray, lam: float, zero_tol: float | None = None) -> np.ndarray:
    """Orthogonal projector onto eigenspaces with 0 < eigenvalue < lam."""
    w, v = np.linalg.eigh(a)
    ztol = zero_tol if zero_tol is not None else ZERO_TOL_ORACLE * max(1.0, float(np.max(np.abs(w))))
    sel = (w > ztol) & (w < lam)
    return (v[:, sel]) @ v[:, sel].conj().T


def positive_count(a: np.ndarray, lam: float, zero_tol: float | None = None) -> int:
    w = np.linalg.eigh(a)[0] if a.ndim == 2 else np.asarray(a)
    ztol = zero_tol if zero_tol is not None else ZERO_TOL_ORACLE * max(1.0, float(np.max(np.abs(w))))
    return int(np.sum((w > ztol) & (w < lam)))


ZERO_TOL_ORACLE = 1e-10


@dataclass(frozen=True)
class OracleVerdict:
    ok: bool
    projector_deviation: float
    counts_match: bool
    count_a: int
    counts_aj: tuple


def simultaneous_diag_oracle(
    a: np.ndarray,
    parts,
    lam: float,
    hyp_tol: float = 1e-10,
    proj_tol: float = 1e-9,
) -> OracleVerdict:
    """Finite-dimensional check: A+ = sum A_j+ and A_j+ A_l+ = 0 imply
    additivity of the positive spectral-window projectors and counts.

    Hypotheses are verified numerically and violations rejected.
    """
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[0]
    if n > 256:
        raise HypothesisError("oracle limited to dimension <= 256")
    mats = [np.asarray(p, dtype=np.complex128) for p in parts]
    for mat in mats + [a]:
        if np.max(np.abs(mat - mat.conj().T)) > hyp_tol * max(1.0, np.max(np.abs(mat))):
            raise HypothesisError("all operators must be Hermitian")

    def plus(mat):
        w, v = np.linalg.eigh(mat)
        return (v * np.maximum(w, 0.0)) @ v.conj().T

    a_plus = plus(a)
    parts_plus = [plus(mat) for mat in mats]
    scale = max(1.0, float(np.max(np.abs(a_plus))))
    sum_dev = float(np.max(np.abs(a_plus - sum(parts_plus))))
    if sum_dev > hyp_tol * scale:
        raise HypothesisError(
            f"hypothesis A+ = sum A_j+ fails (deviation {sum_dev:.3e})"
        )
    for i in range(len(parts_plus)):
        for l in range(len(parts_plus)):
            if i == l:
                continue
            dev = float(np.max(np.abs(parts_plus[i] @ parts_plus[l])))
            if dev > hyp_tol * scale * scale:
                raise HypothesisError(
                    f"hypothesis A_j+ A_l+ = 0 fails for ({i},{l}) (deviation {dev:.3e})"
                )

    pi_a = positive_window_projector(a, lam)
    pi_sum = sum(positive_window_projector(mat, lam) for mat in mats)
    proj_dev = float(np.max(np.abs(pi_a - pi_sum)))
    count_a = positive_count(a, lam)
    counts = tuple(positive_count(mat, lam) for mat in mats)
    counts_match = count_a == sum(counts)
    return OracleVerdict(
        ok=proj_dev <= proj_tol and counts_match,
        projector_deviation=proj_dev,
        counts_match=counts_match,
        count_a=count_a,
        counts_aj=counts,
    )
