"""Symbol calculus: composition, adjoint, brackets, subprincipal, containers."""

import numpy as np
import pytest

from specpart.errors import BandOverflowError, DepthError, DimensionMismatchError
from specpart.quantization import lattice_modes, mode_index, quantize
from specpart.symbols import (
    HomogeneousComponent,
    Symbol,
    adjoint_symbol,
    comp_add,
    comp_max_abs,
    comp_pad,
    comp_scale,
    comp_truncate,
    component_from_modes,
    compose,
    generalized_bracket,
    identity_symbol,
    poisson_bracket,
    subprincipal,
    symbol_dump,
    symbol_from_bytes,
    symbol_to_bytes,
    symmetrize_symbol,
    zero_component,
)

RNG = np.random.default_rng(2718)


def random_component(degree, x_band, theta_band, m, scale=0.3):
    shape = (2 * x_band + 1, 2 * x_band + 1, 2 * theta_band + 1, m, m)
    c = RNG.standard_normal(shape) + 1j * RNG.standard_normal(shape)
    return HomogeneousComponent(degree, scale * c)


def random_symbol(order=1.0, depth=2, x_band=1, theta_band=1, m=2):
    return Symbol(order, tuple(
        random_component(order - k, x_band, theta_band, m) for k in range(depth + 1)
    ))


def component_diff(a, b):
    xb = max(a.x_band, b.x_band)
    tb = max(a.theta_band, b.theta_band)
    return comp_max_abs(comp_add(comp_pad(a, xb, tb), comp_scale(comp_pad(b, xb, tb), -1.0)))


def sample_points(n=40, seed=5):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 2 * np.pi, (n, 2))
    xi = rng.uniform(-2, 2, (n, 2))
    xi[np.hypot(xi[:, 0], xi[:, 1]) < 0.3] += 1.5
    return x, xi


ABS_XI = component_from_modes(1.0, {(0, 0, 0): [[1.0]]}, 0, 0, 1, 1)


# ---------------------------------------------------------------------------
# homogeneity and evaluation
# ---------------------------------------------------------------------------

def test_homogeneity_sampled():
    comp = random_component(0.7, 2, 3, 2)
    xg = 2 * np.pi * np.arange(16) / 16.0
    th = 2 * np.pi * np.arange(32) / 32.0
    x1, th_p = np.meshgrid(xg, th, indexing="ij")
    x1 = x1.ravel()
    x2 = np.zeros_like(x1)
    for alpha in (2.0, 3.7):
        v1 = comp.eval_points(x1, x2, alpha * np.cos(th_p.ravel()), alpha * np.sin(th_p.ravel()))
        v0 = comp.eval_points(x1, x2, np.cos(th_p.ravel()), np.sin(th_p.ravel()))
        assert np.max(np.abs(v1 - alpha ** 0.7 * v0)) < 1e-12


def test_component_shape_validation():
    with pytest.raises(ValueError):
        HomogeneousComponent(1.0, np.zeros((2, 2, 3, 1, 1)))


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

def test_compose_identity_is_exact():
    a = random_symbol()
    ca = compose(a, identity_symbol(2, 0.0, a.depth), a.depth, band_tol=None)
    for k in range(a.depth + 1):
        assert component_diff(ca.components[k], a.components[k]) < 1e-13


def test_compose_multipliers_pointwise_product():
    # x-independent symbols: no derivative corrections beyond degree bookkeeping
    s3 = np.array([[1, 0], [0, -1.0]])
    a = Symbol(1.0, (component_from_modes(1.0, {(0, 0, 1): s3 / 2, (0, 0, -1): s3 / 2}, 0, 1, 2, 2),))
    b = Symbol(0.0, (component_from_modes(0.0, {(0, 0, 0): np.eye(2) * 2.0}, 0, 0, 2, 2),))
    ab = compose(a, b, 0, band_tol=None)
    x, xi = sample_points()
    va = a.eval_points(x[:, 0], x[:, 1], xi[:, 0], xi[:, 1])
    vb = b.eval_points(x[:, 0], x[:, 1], xi[:, 0], xi[:, 1])
    vab = ab.eval_points(x[:, 0], x[:, 1], xi[:, 0], xi[:, 1])
    assert np.max(np.abs(vab - np.matmul(va, vb))) < 1e-12


def interior_mask(lam, margin, low_cut=2):
    modes = lattice_modes(lam)
    inner = np.max(np.abs(modes), axis=1) <= lam - margin
    low = np.hypot(modes[:, 0], modes[:, 1]) >= low_cut
    return inner & low


def test_compose_vs_quantized_product():
    """Oracle: exact matrix product of the quantized operators at lam = 8."""
    lam = 8
    mod = Symbol(0.0, (component_from_modes(0.0, {(1, 0, 0): np.eye(1)}, 1, 0, 1, 1),))
    mult = Symbol(1.0, (component_from_modes(1.0, {(0, 0, 0): np.eye(1)}, 0, 0, 1, 1),))
    q_mod = quantize(mod, lam, symmetrize=False)
    q_mult = quantize(mult, lam, symmetrize=False)
    oracle = q_mod.matrix @ q_mult.matrix
    mask = interior_mask(lam, 2)
    cols = np.where(mask)[0]

    # modulation first: d_xi(mod) = 0, composition is exact at every depth
    for depth in (0, 1, 2):
        qc = quantize(compose(pad_to(mod, depth), pad_to(mult, depth), depth,
                              band_tol=None), lam, symmetrize=False)
        err = np.max(np.abs((qc.matrix - oracle)[:, cols]))
        assert err < 1e-12

    # multiplier first: the asymptotic series truncates a genuine Taylor tail,
    # so the discrepancy must decrease as the depth increases
    oracle2 = q_mult.matrix @ q_mod.matrix
    cols_hi = np.where(interior_mask(lam, 2, low_cut=4))[0]
    errs = []
    for depth in (0, 1, 2, 3):
        qc = quantize(compose(pad_to(mult, depth), pad_to(mod, depth), depth,
                              band_tol=None), lam, symmetrize=False)
        errs.append(np.max(np.abs((qc.matrix - oracle2)[:, cols_hi])))
    assert all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
    assert errs[-1] < 3e-3


def pad_to(sym, depth):
    from specpart.symbols import pad_depth

    return pad_depth(sym, depth)


def test_compose_associativity_up_to_truncation():
    a = random_symbol(order=1.0)
    b = random_symbol(order=0.0)
    c = random_symbol(order=1.0)
    left = compose(compose(a, b, 2, band_tol=None), c, 2, band_tol=None, strict_depth=False)
    right = compose(a, compose(b, c, 2, band_tol=None), 2, band_tol=None, strict_depth=False)
    for k in range(3):
        assert component_diff(left.components[k], right.components[k]) < 1e-10


def test_compose_errors():
    a = random_symbol(m=2)
    b = random_symbol(m=2)
    with pytest.raises(DepthError):
        compose(a, b, depth=5)
    c1 = Symbol(0.0, (component_from_modes(0.0, {(0, 0, 0): np.eye(1)}, 0, 0, 1, 1),))
    with pytest.raises(DimensionMismatchError):
        compose(a, c1, 0)


# ---------------------------------------------------------------------------
# adjoint
# ---------------------------------------------------------------------------

def test_adjoint_hermitian_multiplier_fixed_point():
    s1 = np.array([[0, 1], [1, 0.0]])
    a = Symbol(1.0, (component_from_modes(1.0, {(0, 0, 0): s1}, 0, 0, 2, 2),
                     zero_component(0.0, 0, 0, 2, 2)))
    adj = adjoint_symbol(a, band_tol=None)
    for k in range(2):
        assert component_diff(adj.components[k], a.components[k]) < 1e-14


def test_adjoint_involution():
    for _ in range(3):
        a = random_symbol(depth=2)
        aa = adjoint_symbol(adjoint_symbol(a, band_tol=None), band_tol=None)
        for k in range(3):
            assert component_diff(aa.components[k], a.components[k]) < 1e-12


def test_adjoint_vs_matrix_adjoint():
    """Oracle: conjugate transpose of the quantized modulation operator."""
    lam = 6
    mod = Symbol(0.0, (component_from_modes(0.0, {(1, 0, 0): np.eye(1)}, 1, 0, 1, 1),))
    adj = adjoint_symbol(mod, band_tol=None)
    q_adj = quantize(adj, lam, symmetrize=False).matrix
    q_star = quantize(mod, lam, symmetrize=False).matrix.conj().T
    mask = interior_mask(lam, 2)
    sel = np.where(mask)[0]
    assert np.max(np.abs((q_adj - q_star)[np.ix_(sel, sel)])) < 1e-13


def test_adjoint_depth_error():
    with pytest.raises(DepthError):
        adjoint_symbol(random_symbol(depth=1), depth=3)


def test_symmetrize_self_adjoint():
    a = random_symbol(depth=2)
    s = symmetrize_symbol(a, band_tol=None)
    adj = adjoint_symbol(s, band_tol=None)
    for k in range(3):
        assert component_diff(adj.components[k], s.components[k]) < 1e-12


# ---------------------------------------------------------------------------
# brackets
# ---------------------------------------------------------------------------

def test_poisson_x_only_fields_vanish():
    f = component_from_modes(0.0, {(1, 0, 0): np.eye(2), (0, 2, 0): 0.3 * np.eye(2)}, 2, 0, 2, 2)
    g = component_from_modes(0.0, {(0, 1, 0): np.eye(2)}, 1, 0, 2, 2)
    assert comp_max_abs(poisson_bracket(f, g)) < 1e-14


def test_poisson_antisymmetry_scalars():
    for _ in range(3):
        b = random_component(1.0, 1, 2, 1)
        c = random_component(0.0, 2, 1, 1)
        lhs = poisson_bracket(b, c)
        rhs = comp_scale(poisson_bracket(c, b), -1.0)
        assert component_diff(lhs, rhs) < 1e-12


def test_poisson_closed_form():
    # {|xi|, e^{ik.x}} = -i (k.xi/|xi|) e^{ik.x}  (hand calculation)
    k = (2, -1)
    c = component_from_modes(0.0, {(k[0], k[1], 0): [[1.0]]}, 2, 0, 1, 1)
    pb = poisson_bracket(ABS_XI, c)
    x, xi = sample_points()
    r = np.hypot(xi[:, 0], xi[:, 1])
    got = pb.eval_points(x[:, 0], x[:, 1], xi[:, 0], xi[:, 1])[:, 0, 0]
    expect = -1j * (k[0] * xi[:, 0] + k[1] * xi[:, 1]) / r * np.exp(
        1j * (k[0] * x[:, 0] + k[1] * x[:, 1]))
    assert np.max(np.abs(got - expect)) < 1e-12


def test_generalized_bracket_middle_identity():
    b = random_component(1.0, 1, 1, 2)
    d = random_component(0.0, 1, 2, 2)
    ident = component_from_modes(0.0, {(0, 0, 0): np.eye(2)}, 0, 0, 2, 2)
    assert component_diff(generalized_bracket(b, ident, d), poisson_bracket(b, d)) < 1e-12


def test_generalized_bracket_x_independent_vanishes():
    b = component_from_modes(1.0, {(0, 0, 1): np.eye(2), (0, 0, -1): np.eye(2)}, 0, 1, 2, 2)
    c = component_from_modes(0.0, {(0, 0, 0): np.eye(2)}, 0, 0, 2, 2)
    assert comp_max_abs(generalized_bracket(b, c, b)) < 1e-14


def test_generalized_bracket_closed_form_zero():
    # B = D = |xi|, C = e^{ik.x} Id: both terms vanish since B_x = D_x = 0
    absxi2 = component_from_modes(1.0, {(0, 0, 0): np.eye(2)}, 0, 0, 2, 2)
    ck = component_from_modes(0.0, {(2, 1, 0): np.eye(2)}, 2, 0, 2, 2)
    g = generalized_bracket(absxi2, ck, absxi2)
    assert comp_max_abs(g) < 1e-14


# ---------------------------------------------------------------------------
# subprincipal
# ---------------------------------------------------------------------------

def test_subprincipal_x_independent_passthrough():
    a = Symbol(1.0, (component_from_modes(1.0, {(0, 0, 0): np.eye(2)}, 0, 0, 2, 2),
                     component_from_modes(0.0, {(0, 0, 1): 0.5 * np.eye(2),
                                                (0, 0, -1): 0.5 * np.eye(2)}, 0, 1, 2, 2)))
    sub = subprincipal(a)
    assert component_diff(sub, a.components[1]) < 1e-14


def test_subprincipal_closed_form():
    # a_s = e^{i x1} xi_1 Id, a_{s-1} = 0  ->  A_sub = -(1/2) e^{i x1} Id
    comp = component_from_modes(1.0, {(1, 0, 1): [[0.5]], (1, 0, -1): [[0.5]]}, 1, 1, 1, 1)
    a = Symbol(1.0, (comp, zero_component(0.0, 1, 1, 1, 1)))
    sub = subprincipal(a)
    x = np.linspace(0, 2 * np.pi, 9)[:-1]
    got = sub.eval_points(x, 0 * x, np.ones_like(x), 0 * x)[:, 0, 0]
    assert np.max(np.abs(got - (-0.5 * np.exp(1j * x)))) < 1e-13


def test_subprincipal_of_symmetrized_is_hermitian():
    a = symmetrize_symbol(random_symbol(depth=2), band_tol=None)
    sub = subprincipal(a)
    star_diff = component_diff(sub, _comp_star(sub))
    assert star_diff < 1e-12


def _comp_star(c):
    from specpart.symbols import comp_star

    return comp_star(c)


def test_subprincipal_needs_subleading():
    a = Symbol(1.0, (random_component(1.0, 1, 1, 2),))
    with pytest.raises(DepthError):
        subprincipal(a)


# ---------------------------------------------------------------------------
# band policy and containers
# ---------------------------------------------------------------------------

def test_band_truncation_hard_error():
    c = component_from_modes(0.0, {(2, 0, 0): [[1.0]]}, 2, 0, 1, 1)
    with pytest.raises(BandOverflowError):
        comp_truncate(c, 1, 0, band_tol=1e-10)


def test_band_truncation_roundoff_passes():
    c = component_from_modes(0.0, {(1, 0, 0): [[1.0]], (2, 0, 0): [[1e-14]]}, 2, 0, 1, 1)
    out = comp_truncate(c, 1, 0, band_tol=1e-10)
    assert out.x_band == 1


def test_serialization_round_trip():
    a = random_symbol(order=1.5, depth=2, m=2)
    raw = symbol_to_bytes(a)
    assert raw[:6] == b"SPSYM1"
    b = symbol_from_bytes(raw)
    assert b.order == a.order and b.depth == a.depth and b.m == a.m
    for ca, cb in zip(a.components, b.components):
        assert np.array_equal(ca.coeffs, cb.coeffs)


def test_serialization_bad_magic():
    with pytest.raises(ValueError):
        symbol_from_bytes(b"NOTMAG" + b"\x00" * 64)


def test_dump_human_readable():
    a = identity_symbol(2, 0.0, 1)
    text = symbol_dump(a)
    assert "symbol order=0" in text and "k=(+0,+0) n=+0" in text
