"""Semi-axis partition, classification, series matching, and the lemma toolbox."""

import numpy as np
import pytest

from specpart.errors import HypothesisError
from specpart.partition import (
    build_semiaxis_partition,
    classify_eigenfunctions,
    cluster_count_bound,
    distance_stats,
    gram_orthonormalize,
    inverse_sqrt_oracle,
    match_series,
    merge_positive_spectra,
    one_sided_distances,
    partition_exponents,
    positive_count,
    simultaneous_diag_oracle,
)
from specpart.quantization import model_operator, quantize
from specpart.spectral import spectrum


# ---------------------------------------------------------------------------
# semi-axis partition geometry
# ---------------------------------------------------------------------------

def test_exponent_closed_forms():
    beta, gamma = partition_exponents(4.0, 1.0, 2.0)
    assert beta == pytest.approx(1.0 / 9.0, abs=0)
    assert gamma == pytest.approx(11.0 / 9.0, abs=0)
    with pytest.raises(ValueError):
        partition_exponents(-1.0, 1.0, 2.0)


@pytest.fixture(scope="module")
def two_speed_partition(request):
    rec = spectrum(quantize(model_operator("two_speed", depth=1), 16),
                   with_vectors=False)
    return build_semiaxis_partition(4.0, 1.0, 2.0, rec.positive(), 200), rec


def test_nu_strictly_increasing(two_speed_partition):
    part, _ = two_speed_partition
    assert np.all(np.diff(part.nu) > 0)
    assert part.nu[0] == 0.0


def test_cn_within_quarter_beta(two_speed_partition):
    part, _ = two_speed_partition
    assert np.all(np.abs(part.c[1:]) <= part.beta / 4 + 1e-15)


def test_empirical_gap_constant_positive(two_speed_partition):
    part, _ = two_speed_partition
    assert part.empirical_c > 0.0
    # the reported constant is indeed min_n n^gamma dist_n
    ns = np.arange(1, len(part.nu), dtype=float)
    assert part.empirical_c == pytest.approx(float(np.min(ns ** part.gamma * part.dist[1:])))


def test_interval_length_exponent(two_speed_partition):
    part, _ = two_speed_partition
    target = -part.alpha * part.d / part.s
    got = part.length_fit_exponent()
    assert abs(got - target) <= 0.15 * abs(target)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def test_classification_multiplier_exact(store):
    pset, _ = store.pset_ajs("diag_multiplier", depth=2)
    rec = store.record("diag_multiplier", 8, with_vectors=True, depth=2)
    projs = {j: quantize(pset.projection(j), 8) for j in pset.indices}
    rep = classify_eigenfunctions(rec, projs)
    # eigenvalue lambda determines the branch: speed-1 values are integers' radii,
    # speed-2 doubles them; labels must match the generating branch exactly
    assert np.all(rep.dominance > 1 - 1e-10)
    assert not np.any(rep.unclassifiable)
    assert np.all(np.isin(rep.label, [1, 2]))


def test_classification_dirac_negative_mass(store):
    """Positive eigenfunctions carry no negative-branch mass (upper trusted half)."""
    pset, _ = store.pset_ajs("dirac2d", depth=3)
    rec = store.record("dirac2d", 24, with_vectors=True, depth=3)
    projs = {j: quantize(pset.projection(j), 24) for j in pset.indices}
    rep = classify_eigenfunctions(rec, projs)
    upper = rep.eigenvalue > rec.trusted_max / 2
    assert np.max(rep.negative_mass[upper]) <= 1e-6


def test_classification_dominance_trend(store):
    pset, _ = store.pset_ajs("two_speed_perturbed", depth=3, eps=0.1)
    rec = store.record("two_speed_perturbed", 16, with_vectors=True, depth=3, eps=0.1)
    projs = {j: quantize(pset.projection(j), 16) for j in pset.indices}
    rep = classify_eigenfunctions(rec, projs)
    bins = np.array_split(np.arange(len(rep.k)), 6)
    gaps = [float(np.mean(np.abs(1.0 - rep.dominance[b]))) for b in bins]
    # dominance approaches one: the binned distance to 1 decays (small wiggles
    # between adjacent bins allowed, factor-2 slack)
    assert gaps[-1] < gaps[0] / 10
    assert all(gaps[i + 1] <= 2.0 * gaps[i] for i in range(len(gaps) - 1))
    assert gaps[-1] < 1e-3
    assert not np.any(rep.unclassifiable)


# ---------------------------------------------------------------------------
# series matching
# ---------------------------------------------------------------------------

def test_match_series_multiplier_exact(store):
    pset, ajs = store.pset_ajs("diag_multiplier", depth=2)
    rec = store.record("diag_multiplier", 12, with_vectors=False, depth=2)
    rec_js = {j: store.record_for(ajs[j], 12, tag="aj") for j in ajs}
    match = match_series(rec, rec_js, alpha=4.0, s=1.0, d=2.0)
    assert np.max(match.residual) <= 1e-10
    assert len(match.candidates) == 1
    assert not match.mismatch_after
    # matched pairs land in the same partition interval past stabilization
    iv_lam = match.partition.interval_of(match.lam)
    iv_mu = match.partition.interval_of(match.mu)
    past = iv_lam > match.stabilization_n
    assert np.all(iv_lam[past] == iv_mu[past])


def test_match_series_self_match(store):
    rec = store.record("diag_multiplier", 12, with_vectors=False, depth=2)
    match = match_series(rec, {1: rec}, alpha=4.0, s=1.0, d=2.0)
    assert match.r_alpha == 0
    assert np.max(match.residual) == 0.0


def test_distance_stats_self_is_zero(store):
    rec = store.record("diag_multiplier", 12, with_vectors=False, depth=2)
    st = distance_stats(rec, {1: rec})
    assert st.merged == 0.0 and st.per_branch[1] == 0.0


def test_one_sided_distances():
    targets = np.array([1.0, 2.0, 5.0])
    vals = np.array([0.5, 1.9, 3.5, 6.0])
    got = one_sided_distances(vals, targets)
    assert np.allclose(got, [0.5, 0.1, 1.5, 1.0])


# ---------------------------------------------------------------------------
# Gram orthonormalizer
# ---------------------------------------------------------------------------

def test_gram_identity_fixed_point():
    g = gram_orthonormalize(np.eye(5))
    assert np.max(np.abs(g - np.eye(5))) == 0.0


def test_gram_2x2_oracle():
    f = np.array([[1.0, 1e-3], [1e-3, 1.0]])
    g = gram_orthonormalize(f)
    assert np.max(np.abs(g @ f @ g - np.eye(2))) < 1e-12
    assert np.max(np.abs(g - inverse_sqrt_oracle(f))) < 1e-12


def test_gram_r64_conclusions():
    """Both stated conclusions at the hypothesis boundary ||F-I||_max = 1/(3 r^2)."""
    rng = np.random.default_rng(99)
    r = 64
    z = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    z = 0.5 * (z + z.conj().T)
    z *= (1.0 / (3 * r * r)) / np.max(np.abs(z))
    f = np.eye(r) + z
    g = gram_orthonormalize(f)
    assert np.max(np.abs(g @ f @ g - np.eye(r))) < 1e-12
    assert np.max(np.abs(g - np.eye(r))) <= np.max(np.abs(f - np.eye(r)))


def test_gram_hypothesis_rejection():
    r = 8
    f = np.eye(r)
    f[0, 1] = f[1, 0] = 1.0 / (3 * r * r) * 5
    with pytest.raises(HypothesisError, match="hypothesis"):
        gram_orthonormalize(f)
    with pytest.raises(HypothesisError, match="Hermitian"):
        gram_orthonormalize(np.triu(np.ones((3, 3))))


# ---------------------------------------------------------------------------
# cluster counting bound
# ---------------------------------------------------------------------------

def test_cluster_bound_exact_eigenvectors(store):
    rec = store.record("diag_multiplier", 8, with_vectors=True, depth=2)
    sel = np.arange(40, 44)
    verdict = cluster_count_bound(rec.eigenvalues[sel], rec.eigenvectors[:, sel],
                                  rec, eps=1e-10)
    assert verdict.ok and verdict.count >= verdict.required
    assert verdict.interval[1] - verdict.interval[0] <= (
        rec.eigenvalues[sel[-1]] - rec.eigenvalues[sel[0]] + 1e-8)


def test_cluster_bound_perturbed_vectors(store):
    rec = store.record("two_speed_perturbed", 8, with_vectors=True, depth=2, eps=0.1)
    sel = np.arange(30, 36)
    rng = np.random.default_rng(4)
    u = rec.eigenvectors[:, sel] + 1e-6 * (
        rng.standard_normal((rec.size, len(sel)))
        + 1j * rng.standard_normal((rec.size, len(sel))))
    u, _ = np.linalg.qr(u)
    verdict = cluster_count_bound(rec.eigenvalues[sel], u, rec, eps=1e-3)
    assert verdict.ok
    assert verdict.measured_eps <= 1e-3


def test_cluster_bound_rejects_bad_columns(store):
    rec = store.record("diag_multiplier", 8, with_vectors=True, depth=2)
    u = rec.eigenvectors[:, [10, 10]]
    with pytest.raises(HypothesisError, match="orthonormal"):
        cluster_count_bound(rec.eigenvalues[[10, 11]], u, rec, eps=1e-6)


# ---------------------------------------------------------------------------
# simultaneous diagonalization oracle
# ---------------------------------------------------------------------------

def _disjoint_family(n, rng, conjugate):
    d1 = np.zeros(n)
    d2 = np.zeros(n)
    dneg = np.zeros(n)
    third = n // 3
    d1[:third] = rng.uniform(0.5, 3.0, third)
    d2[third:2 * third] = rng.uniform(0.5, 3.0, third)
    dneg[2 * third:] = -rng.uniform(0.1, 2.0, n - 2 * third)
    if conjugate:
        z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        u, _ = np.linalg.qr(z)
    else:
        u = np.eye(n)
    a1 = u @ np.diag(d1) @ u.conj().T
    a2 = u @ np.diag(d2) @ u.conj().T
    a = u @ np.diag(d1 + d2 + dneg) @ u.conj().T
    return a, [a1, a2]


def test_oracle_commuting_diagonal_family():
    rng = np.random.default_rng(11)
    a, parts = _disjoint_family(30, rng, conjugate=False)
    v = simultaneous_diag_oracle(a, parts, 2.0)
    assert v.ok and v.projector_deviation < 1e-12
    assert v.count_a == sum(v.counts_aj)


def test_oracle_conjugated_family():
    rng = np.random.default_rng(12)
    a, parts = _disjoint_family(128, rng, conjugate=True)
    v = simultaneous_diag_oracle(a, parts, 1.5)
    assert v.ok and v.projector_deviation <= 1e-10
    # counting identity is exact
    assert v.count_a == positive_count(a, 1.5) == sum(v.counts_aj)


def test_oracle_rejects_overlapping_supports():
    rng = np.random.default_rng(13)
    n = 24
    d1 = np.zeros(n)
    d2 = np.zeros(n)
    d1[:10] = rng.uniform(0.5, 2.0, 10)
    d2[5:15] = rng.uniform(0.5, 2.0, 10)  # overlap -> A_1+ A_2+ != 0
    a1, a2 = np.diag(d1), np.diag(d2)
    with pytest.raises(HypothesisError):
        simultaneous_diag_oracle(a1 + a2, [a1, a2], 2.0)


def test_oracle_rejects_large_dimension():
    with pytest.raises(HypothesisError, match="256"):
        simultaneous_diag_oracle(np.eye(300), [np.eye(300)], 1.0)


def test_merge_positive_spectra_multiplicity(store):
    rec = store.record("diag_multiplier", 8, with_vectors=False, depth=2)
    merged = merge_positive_spectra([rec, rec])
    assert len(merged) == 2 * len(rec.positive())
    assert np.all(np.diff(merged) >= 0)
