"""Propagators, Hamiltonian flows, wave packets, commutation diagnostics."""

import numpy as np
import pytest

from specpart.errors import ComputationError
from specpart.eigenstructure import eigendecompose_principal
from specpart.hyperbolic import (
    circular_center,
    commutator_diagnostic,
    gaussian_packet,
    hamiltonian_flow,
    packet_density,
    propagator,
    propagator_apply,
    sqrt_commutator_diagnostic,
    sqrt_propagator,
    torus_distance,
    track_singularity,
)
from specpart.quantization import excision, lattice_modes, model_operator, quantize
from specpart.spectral import SpectrumRecord, spectrum
from specpart.symbols import comp_add, comp_max_abs, comp_pad, comp_scale


@pytest.fixture(scope="module")
def multiplier_rec():
    return spectrum(quantize(model_operator("diag_multiplier", depth=0), 8))


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------

def test_propagator_at_zero_is_identity(multiplier_rec):
    u = propagator(multiplier_rec, 0.0)
    assert np.max(np.abs(u - np.eye(u.shape[0]))) < 1e-12


def test_propagator_group_law(multiplier_rec):
    u1 = propagator(multiplier_rec, 0.35)
    u2 = propagator(multiplier_rec, -0.35)
    n = u1.shape[0]
    assert np.max(np.abs(u1 @ u2 - np.eye(n))) < 1e-9
    u3 = propagator(multiplier_rec, 0.7)
    assert np.max(np.abs(u1 @ u1 - u3)) < 1e-9


def test_propagator_multiplier_phases(multiplier_rec):
    t = 0.8
    u = propagator(multiplier_rec, t)
    modes = lattice_modes(8)
    r = np.hypot(modes[:, 0], modes[:, 1])
    phases = np.empty(multiplier_rec.size, dtype=complex)
    phases[0::2] = np.exp(-1j * t * excision(r) * r)
    phases[1::2] = np.exp(-1j * t * 2 * excision(r) * r)
    assert np.max(np.abs(u - np.diag(phases))) < 1e-9


def test_sqrt_propagator_constant_block():
    rec = SpectrumRecord(np.full(3, 4.0), np.eye(3, dtype=complex), 10.0, "c", 4, 1)
    u = sqrt_propagator(rec, t=1.0, n=1)
    assert np.max(np.abs(u - np.exp(-2j) * np.eye(3))) < 1e-12


def test_sqrt_propagator_second_order_phases():
    rec = spectrum(quantize(model_operator("second_order_nonneg", depth=0), 6))
    t = 0.5
    u = sqrt_propagator(rec, t)
    # eigenvalues chi|k|^2 and 4 chi|k|^2: phase speeds |k| and 2|k| on chi = 1
    w = rec.eigenvalues
    expect = np.exp(-1j * t * np.sqrt(np.maximum(w, 0.0)))
    got = np.linalg.eigvals(u)
    assert np.max(np.abs(np.sort_complex(got) - np.sort_complex(expect))) < 1e-9


def test_cosine_reconstruction():
    """2 cos(t sqrt(Q)) = U(t) + U(t)* for the nonnegative propagator."""
    rec = spectrum(quantize(model_operator("second_order_nonneg", depth=0), 6))
    t = 0.9
    u = sqrt_propagator(rec, t)
    w = np.maximum(rec.eigenvalues, 0.0)
    cos_direct = (rec.eigenvectors * np.cos(t * np.sqrt(w))) @ rec.eigenvectors.conj().T
    assert np.max(np.abs(2 * cos_direct - (u + u.conj().T))) < 1e-9


def test_sqrt_propagator_rejects_negative():
    rec = SpectrumRecord(np.array([-0.5, 1.0]), np.eye(2, dtype=complex), 10.0, "n", 4, 1)
    with pytest.raises(ComputationError):
        sqrt_propagator(rec, 1.0)


# ---------------------------------------------------------------------------
# Hamiltonian flow
# ---------------------------------------------------------------------------

def test_flow_free_motion():
    dec = eigendecompose_principal(model_operator("diag_multiplier", depth=0).principal)
    h1 = dec.field(1).h  # |xi|
    traj = hamiltonian_flow(h1, (1.0, 2.0), (3.0, 4.0), 1.0, 128)
    expect = np.mod(np.array([1.0, 2.0]) + np.array([0.6, 0.8]), 2 * np.pi)
    assert np.max(np.abs(traj.x[-1] - expect)) < 1e-10
    assert np.max(np.abs(traj.xi[-1] - np.array([3.0, 4.0]))) < 1e-10
    assert traj.h_drift.max() < 1e-12


def test_flow_speed_two():
    dec = eigendecompose_principal(model_operator("diag_multiplier", depth=0).principal)
    h2 = dec.field(2).h  # 2|xi|
    traj = hamiltonian_flow(h2, (0.0, 0.0), (1.0, 0.0), 1.0, 64)
    assert np.max(np.abs(traj.x[-1] - np.array([2.0, 0.0]))) < 1e-10


def test_flow_energy_conservation_perturbed(store):
    """x-dependent Hamiltonian: drift stays below 1e-8 over a full period."""
    dec = store.decomp("two_speed_perturbed", depth=3, eps=0.1)
    h = dec.field(1).h
    traj = hamiltonian_flow(h, (0.3, 1.1), (5.0, 2.0), 2 * np.pi, 4096, flow_tol=1e-8)
    assert traj.h_drift.max() <= 1e-8
    assert traj.steps == 4096


def test_flow_rejects_zero_momentum():
    dec = eigendecompose_principal(model_operator("diag_multiplier", depth=0).principal)
    with pytest.raises(ComputationError):
        hamiltonian_flow(dec.field(1).h, (0.0, 0.0), (0.0, 0.0), 1.0, 16)


# ---------------------------------------------------------------------------
# wave packets
# ---------------------------------------------------------------------------

def test_packet_center_and_mass():
    packet = gaussian_packet(16, 2, (np.pi, np.pi), (5.0, 0.0), np.array([0.0, 1.0]))
    dens = packet_density(packet.vector, 16, 2)
    center = circular_center(dens)
    assert torus_distance(center, np.array([np.pi, np.pi])) < 1e-6
    assert packet.band_mass >= 0.99
    assert abs(np.linalg.norm(packet.vector) - 1.0) < 1e-12


def test_packet_band_overflow():
    with pytest.raises(ComputationError):
        gaussian_packet(8, 2, (0.0, 0.0), (7.0, 0.0), np.array([1.0, 0.0]))


@pytest.fixture(scope="module")
def multiplier_rec16(request):
    return spectrum(quantize(model_operator("diag_multiplier", depth=0), 16))


def test_packet_tracks_speed_two(multiplier_rec16, store):
    """Speed-2 branch: center moves at speed 2 along eta/|eta| (free flow)."""
    dec = store.decomp("diag_multiplier", depth=2)
    packet = gaussian_packet(16, 2, (np.pi, np.pi), (5.0, 0.0), np.array([0.0, 1.0]))
    track = track_singularity(multiplier_rec16, packet, dec.field(2).h,
                              times=[-0.75, -0.25, 0.0, 0.25, 0.75])
    assert track.max_discrepancy <= packet.sigma_x
    assert track.discrepancy[2] < 1e-6  # t = 0
    # flow reference actually moves at speed 2
    moved = torus_distance(track.flow_centers[-1], np.array([np.pi, np.pi]))
    assert abs(moved - 1.5) < 1e-8
    assert track.min_band_mass >= 0.95


def test_projected_out_packet_is_suppressed(multiplier_rec16, store):
    """P_1 U(t) (packet in branch 2) has near-zero mass (cross-term)."""
    pset, _ = store.pset_ajs("diag_multiplier", depth=2)
    p1 = quantize(pset.projection(1), 16)
    packet = gaussian_packet(16, 2, (np.pi, np.pi), (5.0, 0.0), np.array([0.0, 1.0]))
    vt = propagator_apply(multiplier_rec16, 0.6, packet.vector)
    assert np.linalg.norm(p1.matrix @ vt) < 1e-12


# ---------------------------------------------------------------------------
# shell commutator diagnostics
# ---------------------------------------------------------------------------

def test_commutator_zero_at_t_zero(multiplier_rec16, store):
    pset, _ = store.pset_ajs("diag_multiplier", depth=2)
    projs = {j: quantize(pset.projection(j), 16) for j in pset.indices}
    diag = commutator_diagnostic(multiplier_rec16, projs, [4.0, 8.0], t=0.0, n_vec=8)
    for vals in diag.commutator.values():
        assert max(vals) < 1e-12


def test_commutator_multiplier_exact(multiplier_rec16, store):
    """Exact projections commute with the multiplier evolution."""
    pset, _ = store.pset_ajs("diag_multiplier", depth=2)
    projs = {j: quantize(pset.projection(j), 16) for j in pset.indices}
    diag = commutator_diagnostic(multiplier_rec16, projs, [4.0, 8.0], t=1.0, n_vec=8)
    for vals in diag.commutator.values():
        assert max(vals) < 1e-12
    for vals in diag.cross.values():
        assert max(vals) < 1e-12


def test_sqrt_projection_check_multiplier_exact(store):
    rec = spectrum(quantize(model_operator("second_order_nonneg", depth=2), 12))
    pset, _ = store.pset_ajs("second_order_nonneg", depth=2)
    projs = {j: quantize(pset.projection(j), 12) for j in pset.indices}
    diag = sqrt_commutator_diagnostic(rec, projs, [4.0, 7.0], n_vec=8)
    for vals in diag.commutator.values():
        assert max(vals) < 1e-11


def test_sqrt_projections_match_first_order(store):
    """Projections of the operator square equal those of the first-order
    operator: (sqrt A)_prin = sum sqrt(h) P^(l) shares the eigenstructure."""
    pset1, _ = store.pset_ajs("two_speed_perturbed", depth=3, eps=0.1)
    pset2, _ = store.pset_ajs("second_order_nonneg", depth=3, eps=0.1)
    for j in (1, 2):
        p1 = pset1.projection(j)
        p2 = pset2.projection(j)
        lead = comp_add(p1.principal, comp_scale(
            comp_pad(p2.principal, p1.principal.x_band, p1.principal.theta_band), -1.0))
        assert lead.norm() <= 1e-10
        for k in range(1, min(p1.depth, p2.depth) + 1):
            diff = comp_add(p1.components[k], comp_scale(
                comp_pad(p2.components[k], p1.components[k].x_band,
                         p1.components[k].theta_band), -1.0))
            assert diff.norm() <= 1e-7
