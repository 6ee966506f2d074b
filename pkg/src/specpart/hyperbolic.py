"""Exact spectral propagators, Hamiltonian flows, and commutation diagnostics.

The oscillatory-integral construction of the evolution is replaced by exact
functional calculus on the lattice; the projection/propagator commutation
statements then become measurable decay of [U(t), P_j] on high-frequency
shells, and the flow content is probed with Gaussian wave packets whose
centers must follow the classical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ComputationError
from .fourier import eval_at_points, mode_range
from .projections import fit_loglog_slope
from .quantization import lattice_modes
from .spectral import SpectrumRecord, apply_function, matrix_function, nonneg_eigenvalues
from .symbols import HomogeneousComponent, comp_dx, comp_dxi


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------

def propagator(rec: SpectrumRecord, t: float) -> np.ndarray:
    """U(t) = exp(-i t Q) as a dense unitary matrix."""
    return matrix_function(rec, lambda w: np.exp(-1j * t * w))


def propagator_apply(rec: SpectrumRecord, t: float, vecs: np.ndarray) -> np.ndarray:
    return apply_function(rec, lambda w: np.exp(-1j * t * w), vecs)


def sqrt_propagator(rec: SpectrumRecord, t: float, n: int = 1) -> np.ndarray:
    """U(t) = exp(-i t Q^(1/2n)) for a nonnegative operator (small negatives clipped)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    w = nonneg_eigenvalues(rec)
    phases = np.exp(-1j * t * w ** (1.0 / (2 * n)))
    if rec.eigenvectors is None:
        raise ComputationError("record stores no eigenvectors")
    return (rec.eigenvectors * phases) @ rec.eigenvectors.conj().T


def sqrt_propagator_apply(rec: SpectrumRecord, t: float, vecs: np.ndarray, n: int = 1) -> np.ndarray:
    w = nonneg_eigenvalues(rec)
    phases = np.exp(-1j * t * w ** (1.0 / (2 * n)))
    coeff = rec.eigenvectors.conj().T @ vecs
    return rec.eigenvectors @ (phases[:, None] * coeff if vecs.ndim == 2 else phases * coeff)


def sqrt_apply(rec: SpectrumRecord, vecs: np.ndarray) -> np.ndarray:
    """Q^(1/2) v via functional calculus (clipped at zero)."""
    w = np.sqrt(nonneg_eigenvalues(rec))
    coeff = rec.eigenvectors.conj().T @ vecs
    return rec.eigenvectors @ (w[:, None] * coeff if vecs.ndim == 2 else w * coeff)


# ---------------------------------------------------------------------------
# Hamiltonian flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowTrajectory:
    t: np.ndarray
    x: np.ndarray        # (n, 2), wrapped to [0, 2 pi)
    xi: np.ndarray       # (n, 2)
    h_drift: np.ndarray  # |h(t) - h(0)|
    steps: int

    def state_at(self, time: float) -> tuple:
        i = int(np.argmin(np.abs(self.t - time)))
        return self.x[i], self.xi[i]


class _HamiltonianField:
    """Point evaluator for h, grad_x h, grad_xi h of a scalar homogeneous field."""

    def __init__(self, h: HomogeneousComponent):
        if h.rows != 1 or h.cols != 1:
            raise ComputationError("flow needs a scalar field")
        self.s = h.degree
        self.g = h.coeffs
        self.gx1 = comp_dx(h, 0).coeffs
        self.gx2 = comp_dx(h, 1).coeffs
        n = mode_range(h.theta_band).reshape(1, 1, -1, 1, 1)
        self.gth = h.coeffs * (1j * n)

    def __call__(self, x, xi):
        x1, x2 = x
        r = float(np.hypot(xi[0], xi[1]))
        if r == 0.0:
            raise ComputationError("flow reached xi = 0")
        th = float(np.arctan2(xi[1], xi[0]))
        vals = [
            eval_at_points(c, [x1], [x2], [th])[0, 0, 0].real
            for c in (self.g, self.gx1, self.gx2, self.gth)
        ]
        g, gx1, gx2 = vals[0], vals[1], vals[2]
        gth = eval_at_points(self.gth, [x1], [x2], [th])[0, 0, 0].real
        rs = r ** self.s
        h = rs * g
        hx = np.array([rs * gx1, rs * gx2])
        ct, st = np.cos(th), np.sin(th)
        hxi = np.array([
            r ** (self.s - 1) * (self.s * ct * g - st * gth),
            r ** (self.s - 1) * (self.s * st * g + ct * gth),
        ])
        return h, hx, hxi


def hamiltonian_flow(
    h: HomogeneousComponent,
    y,
    eta,
    t_final: float,
    steps: int,
    flow_tol: float = 1e-8,
    max_retries: int = 3,
) -> FlowTrajectory:
    """Classical RK4 integration of x' = h_xi, xi' = -h_x from (y, eta).

    Energy drift beyond flow_tol * |h(0)| triggers step-halving retries.
    """
    eta = np.asarray(eta, dtype=float)
    if np.hypot(eta[0], eta[1]) == 0.0:
        raise ComputationError("eta must be nonzero")
    field = _HamiltonianField(h)

    def rhs(state):
        x, xi = state[:2], state[2:]
        _, hx, hxi = field(x, xi)
        return np.concatenate([hxi, -hx])

    for attempt in range(max_retries + 1):
        n = steps * 2 ** attempt
        dt = t_final / n
        ts = np.linspace(0.0, t_final, n + 1)
        out = np.zeros((n + 1, 4))
        out[0] = np.concatenate([np.asarray(y, dtype=float), eta])
        h0 = field(out[0, :2], out[0, 2:])[0]
        drift = np.zeros(n + 1)
        ok = True
        state = out[0].copy()
        for i in range(n):
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * dt * k1)
            k3 = rhs(state + 0.5 * dt * k2)
            k4 = rhs(state + dt * k3)
            state = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            out[i + 1] = state
            drift[i + 1] = abs(field(state[:2], state[2:])[0] - h0)
            if drift[i + 1] > flow_tol * abs(h0):
                ok = False
                break
        if ok:
            return FlowTrajectory(
                t=ts, x=np.mod(out[:, :2], 2.0 * np.pi), xi=out[:, 2:],
                h_drift=drift, steps=n,
            )
    raise ComputationError(
        f"energy drift exceeds flow_tol={flow_tol:.1e} after {max_retries} step-halvings"
    )


# ---------------------------------------------------------------------------
# wave packets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WavePacket:
    vector: np.ndarray       # flat (nmodes * m,), unit norm
    lam: int
    m: int
    center: tuple            # (y1, y2)
    momentum: tuple          # (eta1, eta2)
    sigma_x: float
    band: tuple              # (k_lo, k_hi) euclidean radii of the declared support
    band_mass: float         # fraction of mass inside the declared band


def gaussian_packet(
    lam: int,
    m: int,
    y,
    eta,
    polarization: np.ndarray,
    sigma_x: float | None = None,
    band_radius_sigmas: float = 3.5,
) -> WavePacket:
    """Unit-norm Gaussian packet centered at (y, eta), aligned with a branch.

    Mode amplitude exp(-sigma_x^2 |k - eta|^2 / 2) e^{-i k.y} w with w the
    branch polarization at the center; default width |eta|^(-1/2).
    """
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    freq = float(np.hypot(eta[0], eta[1]))
    if freq == 0:
        raise ComputationError("eta must be nonzero")
    sigma_x = sigma_x if sigma_x is not None else freq ** -0.5
    modes = lattice_modes(lam)
    dk = modes - eta
    g = np.exp(-0.5 * sigma_x ** 2 * np.sum(dk ** 2, axis=1))
    phase = np.exp(-1j * modes @ y)
    w = np.asarray(polarization, dtype=np.complex128)
    w = w / np.linalg.norm(w)
    vec = (g * phase)[:, None] * w[None, :]
    vec = vec.ravel()
    vec /= np.linalg.norm(vec)
    kr = band_radius_sigmas / sigma_x
    band = (max(freq - kr, 0.0), freq + kr)
    rr = np.hypot(modes[:, 0], modes[:, 1])
    inside = (rr >= band[0]) & (rr <= band[1])
    mass = float(np.sum(np.abs(vec.reshape(-1, m)[inside]) ** 2))
    if band[1] > lam:
        raise ComputationError(
            f"packet band {band} does not fit inside the lattice (lam={lam})"
        )
    return WavePacket(vector=vec, lam=lam, m=m, center=tuple(y), momentum=tuple(eta),
                      sigma_x=sigma_x, band=band, band_mass=mass)


def packet_density(vec: np.ndarray, lam: int, m: int) -> np.ndarray:
    """Position-space density sum_p |v_p(x)|^2 on the (2 lam + 1)^2 grid."""
    n = 2 * lam + 1
    modes = vec.reshape(n, n, m)
    emb = np.zeros((n, n, m), dtype=np.complex128)
    idx = mode_range(lam) % n
    emb[np.ix_(idx, idx)] = modes
    f = np.fft.ifft2(emb, axes=(0, 1)) * n * n
    return np.sum(np.abs(f) ** 2, axis=2)


def circular_center(density: np.ndarray) -> np.ndarray:
    """Circular first moment per coordinate: arg of the mean of e^{i x}."""
    n = density.shape[0]
    x = 2.0 * np.pi * np.arange(n) / n
    e = np.exp(1j * x)
    total = float(np.sum(density))
    z1 = np.sum(density.sum(axis=1) * e) / total
    z2 = np.sum(density.sum(axis=0) * e) / total
    return np.mod(np.array([np.angle(z1), np.angle(z2)]), 2.0 * np.pi)


def torus_distance(a: np.ndarray, b: np.ndarray) -> float:
    d = np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2.0 * np.pi) - np.pi
    return float(np.linalg.norm(d))


@dataclass(frozen=True)
class PacketTrack:
    times: np.ndarray
    centers: np.ndarray        # measured packet centers, (n, 2)
    flow_centers: np.ndarray   # classical trajectory positions
    discrepancy: np.ndarray    # torus distance per time
    band_mass: np.ndarray      # in-band mass per time
    sigma_x: float

    @property
    def max_discrepancy(self) -> float:
        return float(np.max(self.discrepancy))

    @property
    def min_band_mass(self) -> float:
        return float(np.min(self.band_mass))


def track_singularity(
    rec: SpectrumRecord,
    packet: WavePacket,
    h_field: HomogeneousComponent,
    times,
    flow_steps_per_unit: int = 512,
    sqrt_n: int = 0,
) -> PacketTrack:
    """Evolve a packet and compare its center with the Hamiltonian flow.

    sqrt_n = 0 uses U(t) = e^{-itQ}; sqrt_n = n >= 1 uses e^{-it Q^(1/2n)}.
    """
    times = np.asarray(sorted(times), dtype=float)
    modes = lattice_modes(packet.lam)
    rr = np.hypot(modes[:, 0], modes[:, 1])
    inside = (rr >= packet.band[0]) & (rr <= packet.band[1])
    centers, flow_pts, masses = [], [], []
    for t in times:
        if sqrt_n:
            vt = sqrt_propagator_apply(rec, t, packet.vector, n=sqrt_n)
        else:
            vt = propagator_apply(rec, t, packet.vector)
        dens = packet_density(vt, packet.lam, packet.m)
        centers.append(circular_center(dens))
        masses.append(float(np.sum(np.abs(vt.reshape(-1, packet.m)[inside]) ** 2)))
        if t == 0.0:
            flow_pts.append(np.mod(np.asarray(packet.center), 2 * np.pi))
        else:
            steps = max(16, int(abs(t) * flow_steps_per_unit))
            traj = hamiltonian_flow(h_field, packet.center, packet.momentum, float(t), steps)
            flow_pts.append(traj.x[-1])
    centers = np.array(centers)
    flow_pts = np.array(flow_pts)
    disc = np.array([torus_distance(c, f) for c, f in zip(centers, flow_pts)])
    return PacketTrack(times=times, centers=centers, flow_centers=flow_pts,
                       discrepancy=disc, band_mass=np.array(masses),
                       sigma_x=packet.sigma_x)


# ---------------------------------------------------------------------------
# shell diagnostics
# ---------------------------------------------------------------------------

def _apply_op(op, vecs: np.ndarray) -> np.ndarray:
    """Apply a dense matrix, QuantizedOperator, or SymbolApplier to flat vectors."""
    if hasattr(op, "apply"):
        m = op.m
        out = op.apply(vecs.reshape(-1, m, vecs.shape[1]) if vecs.ndim == 2
                       else vecs.reshape(-1, m))
        return out.reshape(vecs.shape)
    mat = op.matrix if hasattr(op, "matrix") else op
    return mat @ vecs


def shell_vectors(lam: int, m: int, rho: float, n_vec: int, rng) -> np.ndarray:
    """Random unit vectors supported on modes with |k| in [rho, rho + 1]."""
    modes = lattice_modes(lam)
    rr = np.hypot(modes[:, 0], modes[:, 1])
    sel = np.where((rr >= rho) & (rr <= rho + 1))[0]
    if len(sel) == 0:
        raise ComputationError(f"no modes on shell [{rho}, {rho + 1}]")
    vecs = np.zeros((len(modes) * m, n_vec), dtype=np.complex128)
    draw = rng.standard_normal((len(sel), m, n_vec)) + 1j * rng.standard_normal(
        (len(sel), m, n_vec))
    rows = (sel[:, None] * m + np.arange(m)[None, :]).ravel()
    vecs[rows] = draw.reshape(len(sel) * m, n_vec)
    vecs /= np.linalg.norm(vecs, axis=0)
    return vecs


@dataclass(frozen=True)
class ShellDiagnostic:
    shells: tuple
    commutator: dict    # j -> per-shell max ||[U, P_j] v||
    cross: dict         # (l, j) -> per-shell max ||P_l U P_j v||
    slopes: dict        # j -> fitted log-log slope of the commutator decay
    t: float


def commutator_diagnostic(
    rec: SpectrumRecord,
    projections: dict,
    shells,
    t: float = 1.0,
    n_vec: int = 32,
    seed: int = 0,
) -> ShellDiagnostic:
    """Per-shell norms of [U(t), P_j] and of the cross terms P_l U(t) P_j."""
    rng = np.random.default_rng(seed)
    shells = [float(r) for r in np.atleast_1d(shells)]
    comm = {j: [] for j in projections}
    cross = {(l, j): [] for l in projections for j in projections if l != j}
    for rho in shells:
        vecs = shell_vectors(rec.lam, rec.m, rho, n_vec, rng)
        uv = propagator_apply(rec, t, vecs)
        pv = {j: _apply_op(p, vecs) for j, p in projections.items()}
        upv = {j: propagator_apply(rec, t, pv[j]) for j in projections}
        for j, p in projections.items():
            diff = upv[j] - _apply_op(p, uv)
            comm[j].append(float(np.max(np.linalg.norm(diff, axis=0))))
        for (l, j) in cross:
            val = _apply_op(projections[l], upv[j])
            cross[(l, j)].append(float(np.max(np.linalg.norm(val, axis=0))))
    slopes = {
        j: fit_loglog_slope(np.array(shells), np.array(v)) for j, v in comm.items()
    }
    return ShellDiagnostic(
        shells=tuple(shells),
        commutator={j: tuple(v) for j, v in comm.items()},
        cross={k: tuple(v) for k, v in cross.items()},
        slopes=slopes,
        t=t,
    )


def sqrt_commutator_diagnostic(
    rec: SpectrumRecord,
    projections: dict,
    shells,
    n_vec: int = 32,
    seed: int = 0,
) -> ShellDiagnostic:
    """Per-shell norms of [sqrt(Q), P_j]; the square-root projection check."""
    rng = np.random.default_rng(seed)
    shells = [float(r) for r in np.atleast_1d(shells)]
    comm = {j: [] for j in projections}
    for rho in shells:
        vecs = shell_vectors(rec.lam, rec.m, rho, n_vec, rng)
        sv = sqrt_apply(rec, vecs)
        for j, p in projections.items():
            diff = sqrt_apply(rec, _apply_op(p, vecs)) - _apply_op(p, sv)
            comm[j].append(float(np.max(np.linalg.norm(diff, axis=0))))
    slopes = {
        j: fit_loglog_slope(np.array(shells), np.array(v)) for j, v in comm.items()
    }
    return ShellDiagnostic(
        shells=tuple(shells),
        commutator={j: tuple(v) for j, v in comm.items()},
        cross={},
        slopes=slopes,
        t=0.0,
    )
