import numpy as np
import pytest

from causalw import fixtures
from causalw import phase_space as ps
from causalw.operator_core import LabeledOperator, identity, tensor

G64 = ps.PhaseSpaceGrid(-8.0, 8.0, 64)
G16 = ps.PhaseSpaceGrid(-4.0, 4.0, 16)
G8 = ps.PhaseSpaceGrid(-4.0, 4.0, 8)


def rand_op(rng, n, names=("m0",)):
    d = n ** len(names)
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return LabeledOperator([(k, n) for k in names], m)


def test_grid_validation():
    with pytest.raises(ValueError):
        ps.PhaseSpaceGrid(-8.0, 8.0, 60)
    with pytest.raises(ValueError):
        ps.PhaseSpaceGrid(-8.1, 8.0, 64)
    with pytest.raises(ValueError):
        ps.PhaseSpaceGrid(1.0, 8.0, 64)
    g = ps.PhaseSpaceGrid(-2.0, 6.0, 32)
    assert g.x[g.origin_index] == 0.0
    assert g.p[g.zero_index] == 0.0 and g.omega[g.zero_index] == 0.0
    assert g.cell_xi == pytest.approx(2 * np.pi / 32)


def test_identity_symbol_is_one():
    w = ps.weyl_symbol(identity([("m0", 64)]), G64)
    np.testing.assert_allclose(w.values, 1.0, atol=1e-12)
    assert w.integral() == pytest.approx(64)


def test_gaussian_symbol_matches_closed_form():
    x0, p0, s = 0.5, -1.0, 0.9
    w = ps.weyl_symbol(ps.gaussian_state(G64, x0, p0, s), G64)
    X, P = np.meshgrid(G64.x, G64.p, indexing="ij")
    exact = 2 * np.exp(-((X - x0) ** 2) / s**2 - s**2 * (P - p0) ** 2)
    np.testing.assert_allclose(w.values, exact, atol=1e-9)
    assert abs(w.integral() - 1.0) < 1e-12


def test_projector_symbol_marginal_is_the_indicator():
    proj = ps.position_projector(G64, -1.0, 2.0)
    w = ps.weyl_symbol(proj, G64)
    marginal = w.values.sum(axis=1) * G64.dp / (2 * np.pi)
    np.testing.assert_allclose(marginal, np.diag(proj.data).real / G64.dx, atol=1e-12)


def test_hermitian_symbols_are_real():
    rng = np.random.default_rng(0)
    a = rand_op(rng, 16)
    h = LabeledOperator(a.labels, a.data + a.data.conj().T)
    assert np.max(np.abs(ps.weyl_symbol(h, G16).values.imag)) < 1e-12


def test_weyl_round_trip_and_linearity():
    rng = np.random.default_rng(1)
    a, b = rand_op(rng, 16, ("A", "B")), rand_op(rng, 16, ("A", "B"))
    wa = ps.weyl_symbol(a, G16)
    np.testing.assert_allclose(ps.inverse_weyl(wa).data, a.data, atol=1e-12)
    wab = ps.weyl_symbol(a * 2.0 + b, G16)
    np.testing.assert_allclose(wab.values, 2 * wa.values + ps.weyl_symbol(b, G16).values, atol=1e-12)


def test_weyl_symbol_of_product_operator_factorizes():
    ra, rb = ps.gaussian_state(G16, 0.5, name="A"), ps.gaussian_state(G16, -1.0, 0.5, name="B")
    w = ps.weyl_symbol(tensor(ra, rb), G16).values
    wa, wb = ps.weyl_symbol(ra, G16).values, ps.weyl_symbol(rb, G16).values
    np.testing.assert_allclose(w, np.multiply.outer(wa, wb), atol=1e-14)


def test_grid_size_mismatch():
    with pytest.raises(ValueError):
        ps.weyl_symbol(identity([("m0", 16)]), G64)


# Separations beyond half the box wrap around the periodic grid, so the
# closed forms are compared for |ω| <= L/4.
INNER = np.abs(G64.omega) <= G64.length / 4


def test_chi_of_gaussian_matches_closed_form():
    s = 0.8
    c = ps.gaussian_chi(G64, 0.0, 0.0, s)
    K, W = np.meshgrid(G64.kappa, G64.omega, indexing="ij")
    exact = np.exp(-(K**2) * s**2 / 4 - W**2 / (4 * s**2))
    np.testing.assert_allclose(c.values[:, INNER], exact[:, INNER], atol=1e-9)
    assert c.values[G64.zero_index, G64.zero_index] == pytest.approx(1.0, abs=1e-14)


def test_chi_of_displaced_gaussian_carries_a_phase():
    c = ps.gaussian_chi(G64, 1.0, 0.5, 1.0)
    K, W = np.meshgrid(G64.kappa, G64.omega, indexing="ij")
    exact = np.exp(-(K**2) / 4 - W**2 / 4 - 1j * (1.0 * K + 0.5 * W))
    np.testing.assert_allclose(c.values[:, INNER], exact[:, INNER], atol=1e-9)


def test_chi_of_identity_is_a_delta():
    c = ps.operator_chi(identity([("m0", 16)]), G16)
    z = G16.zero_index
    expected = np.zeros((16, 16))
    expected[z, z] = 2 * np.pi * ps.discrete_delta(G16) * 1.0
    # Tr 1 = n, spread over the n-point grid: a delta of weight 2π
    np.testing.assert_allclose(c.values, expected, atol=1e-12)


def test_fast_chi_agrees_with_two_step_transform():
    rng = np.random.default_rng(2)
    a = rand_op(rng, 8, ("A", "B"))
    slow = ps.chi_transform(ps.weyl_symbol(a, G8))
    fast = ps.operator_chi(a, G8)
    np.testing.assert_allclose(fast.values, slow.values, atol=1e-12)
    np.testing.assert_allclose(ps.chi_operator(fast).data, a.data, atol=1e-12)
    np.testing.assert_allclose(ps.inverse_chi(slow).values, ps.weyl_symbol(a, G8).values, atol=1e-12)


def test_chi_parseval_and_pairing():
    rng = np.random.default_rng(3)
    a, b = rand_op(rng, 16), rand_op(rng, 16)
    exact = np.trace(a.data @ b.data)
    assert abs(ps.chi_pairing(ps.operator_chi(a, G16), ps.operator_chi(b, G16)) - exact) < 1e-10
    # Hilbert-Schmidt norm from the chi function alone
    ca = ps.operator_chi(a, G16)
    hs = np.sum(np.abs(ca.values) ** 2) * ca.cell() / (2 * np.pi)
    assert hs == pytest.approx(np.sum(np.abs(a.data) ** 2), rel=1e-10)


def test_hermiticity_error():
    rng = np.random.default_rng(4)
    a = rand_op(rng, 16)
    h = LabeledOperator(a.labels, a.data + a.data.conj().T)
    assert ps.operator_chi(h, G16).hermiticity_error() < 1e-12
    assert ps.operator_chi(a, G16).hermiticity_error() > 1e-2


def test_tensor_and_reorder_modes():
    ca = ps.operator_chi(ps.gaussian_state(G8, 0.5, name="A"), G8)
    cb = ps.operator_chi(ps.gaussian_state(G8, -0.5, name="B"), G8)
    joint = ps.operator_chi(tensor(ps.gaussian_state(G8, -0.5, name="B"), ps.gaussian_state(G8, 0.5, name="A")), G8)
    np.testing.assert_allclose(ps.reorder_modes(ps.tensor_chi(ca, cb), ("B", "A")).values, joint.values, atol=1e-14)
    with pytest.raises(ValueError):
        ps.tensor_chi(ca, ca)
    with pytest.raises(ValueError):
        ps.reorder_modes(ca, ("B",))


# -- channel checks ----------------------------------------------------------------

def test_identity_channel_passes_cptp():
    rep = ps.check_cptp_chi(fixtures.wigner_fixture("identity-channel", G16))
    assert rep.passed
    assert max(rep.deviation, rep.delta_deviation, rep.closure_deviation) < 1e-12


def test_lossy_bin_fails_cptp():
    rep = ps.check_cptp_chi(fixtures.wigner_fixture("lossy-bin", G16))
    assert not rep.passed
    assert rep.closure_deviation == pytest.approx(1.0)


def test_characteristic_test_map():
    bounds = ps.characteristic_bounds(0.5, 1.0)
    assert bounds == (-1.0, 1.0, -0.5, 0.5)
    m = ps.make_characteristic_test_map(G16, G16, bounds)
    assert ps.check_cptp_chi(m).passed
    # every point of the rectangle, and nothing else, is filled
    z = G16.zero_index
    inside = np.abs(m.values[z, z]) > 0
    K, W = np.meshgrid(G16.kappa, G16.omega, indexing="ij")
    np.testing.assert_array_equal(inside, (np.abs(K) <= 1.0 + 1e-12) & (np.abs(W) <= 0.5 + 1e-12))
    with pytest.raises(ValueError):
        ps.make_characteristic_test_map(G16, G16, (-100.0, 100.0, -0.5, 0.5))


def test_cptp_rejects_wrong_mode_count():
    with pytest.raises(ValueError):
        ps.check_cptp_chi(ps.gaussian_chi(G16))


# -- process structure ------------------------------------------------------------------

def test_one_party_structure():
    ok = ps.check_one_party_structure(fixtures.wigner_fixture("state-identity", G16))
    assert ok.passed and ok.off_column_mass < 1e-12 and abs(ok.w0 - 1) < 1e-12
    # the recovered profile is the transposed input state
    expected = ps.operator_chi(ps.gaussian_state(G16).transpose(), G16).values
    np.testing.assert_allclose(ok.profile.values, expected, atol=1e-12)
    assert not ps.check_one_party_structure(fixtures.wigner_fixture("state-state", G16)).passed
    assert not ps.check_one_party_structure(fixtures.wigner_fixture("entangled", G16)).passed


@pytest.mark.parametrize("kind,cls", [
    ("shared-state", "no-signaling"), ("a-to-b", "A<B"), ("b-to-a", "B<A"), ("both-outputs", "invalid"),
])
def test_two_party_classification(kind, cls):
    rep = ps.check_two_party_structure(fixtures.wigner_fixture(kind, G8))
    assert rep.classification == cls
    assert rep.valid == (cls != "invalid")


def test_two_party_zero_is_invalid():
    z = ps.ChiGrid((G8,) * 4, np.zeros((8,) * 8, dtype=complex), ("A1", "A2", "B1", "B2"))
    assert ps.check_two_party_structure(z).classification == "invalid"


# -- probabilities --------------------------------------------------------------------

def test_one_party_probability_full_and_half_bins():
    w = fixtures.wigner_fixture("state-identity", G16, x0=-G16.dx / 2)
    full = ps.operator_chi(ps.measure_reprepare_cj(G16, G16, [-np.inf, np.inf]), G16)
    assert ps.probability_chi(w, full) == pytest.approx(1.0, abs=1e-12)
    # the state is symmetric about -dx/2, which is a cell boundary
    half = ps.operator_chi(ps.measure_reprepare_cj(G16, G16, [-np.inf, -G16.dx / 2]), G16)
    assert ps.probability_chi(w, half) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("kind", ["shared-state", "a-to-b", "b-to-a"])
def test_two_party_probabilities_are_normalized(kind):
    w = fixtures.wigner_fixture(kind, G8)
    ma = ps.make_characteristic_test_map(G8, G8, ps.characteristic_bounds(1.0, 0.5), labels=("A1", "A2"))
    mb = ps.make_characteristic_test_map(G8, G8, labels=("B1", "B2"))
    assert ps.probability_chi(w, ma, mb) == pytest.approx(1.0, abs=1e-10)


def test_chi_probability_equals_operator_trace():
    w = fixtures.wigner_fixture("a-to-b", G8)
    ea = ps.measure_reprepare_cj(G8, G8, [-np.inf, 0.0], phi=ps.gaussian_ket(G8, 1.0), in_name="A1", out_name="A2")
    eb = ps.measure_reprepare_cj(G8, G8, [0.5, np.inf], in_name="B1", out_name="B2")
    p_chi = ps.probability_chi(w, ps.operator_chi(ea, G8), ps.operator_chi(eb, G8))
    wop = ps.chi_operator(w)
    m = tensor(ea, eb).reorder(wop.names)
    assert p_chi == pytest.approx(float(np.real(np.sum(wop.data * m.data.T))), abs=1e-12)


def test_probability_checks_shapes():
    w = fixtures.wigner_fixture("state-identity", G16)
    with pytest.raises(ValueError):
        ps.probability_chi(w, ps.gaussian_chi(G16))
    other = ps.operator_chi(ps.measure_reprepare_cj(G8, G8, [-np.inf, np.inf]), G8)
    with pytest.raises(ValueError):
        ps.probability_chi(w, other)


def test_grid_csv_round_trip(tmp_path):
    c = ps.gaussian_chi(G8, 0.5, 0.2)
    path = tmp_path / "chi.csv"
    ps.write_grid_csv(path, c)
    header, rows = ps.read_grid_csv(path)
    assert header == ["kappa_m0", "omega_m0", "re", "im"]
    np.testing.assert_array_equal(rows[:, 2] + 1j * rows[:, 3], c.values.ravel())
