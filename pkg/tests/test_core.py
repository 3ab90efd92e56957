"""Tests for spin states, coherent states, Husimi values, and zero conversions."""

import math

import numpy as np
import pytest

from spinrecon.core import (
    INFINITY,
    DegenerateStateError,
    Direction,
    PhasePoint,
    PureState,
    Spin,
    ZeroSet,
    chordal_distance,
    coherent_state,
    coherent_state_by_rotation,
    direction_to_point,
    expand_roots,
    fidelity,
    husimi,
    husimi_grid,
    husimi_states,
    match_zero_sets,
    overlap,
    point_to_direction,
    random_state,
    spin_matrices,
    state_from_zeros,
    time_reverse,
    zeros_of,
)

HALF = Spin(1)
ONE = Spin(2)


def basis_state(spin: Spin, k: int) -> PureState:
    vec = np.zeros(spin.dim, dtype=complex)
    vec[k] = 1.0
    return PureState(spin, vec)


def top_state(spin: Spin) -> PureState:
    return basis_state(spin, 0)


def bottom_state(spin: Spin) -> PureState:
    return basis_state(spin, spin.twos)


# ---------------------------------------------------------------------------
# Spin / Direction / PhasePoint basics


def test_spin_validation():
    assert Spin(3).s == 1.5
    assert Spin(4).dim == 5
    assert str(Spin(1)) == "1/2"
    assert str(Spin(4)) == "2"
    with pytest.raises(ValueError):
        Spin(-1)
    assert Spin.from_s(2.5).twos == 5
    with pytest.raises(ValueError):
        Spin.from_s(0.3)


def test_direction_normalization():
    d = Direction(0.4, 2 * math.pi + 0.3)
    assert d.phi == pytest.approx(0.3)
    assert Direction(0.0, 1.0).phi == 0.0
    assert Direction(math.pi, 2.0).phi == 0.0
    folded = Direction(math.pi + 0.2, 0.0)
    assert folded.theta == pytest.approx(math.pi - 0.2)
    assert folded.phi == pytest.approx(math.pi)


def test_direction_to_point_examples():
    assert direction_to_point(Direction(0.0, 0.0)).z == 0
    p = direction_to_point(Direction(math.pi / 2, math.pi / 2))
    assert p.z == pytest.approx(1j, abs=1e-15)
    assert direction_to_point(Direction(math.pi, 1.23)).infinite


def test_point_to_direction_examples():
    d = point_to_direction(PhasePoint(0j))
    assert (d.theta, d.phi) == (0.0, 0.0)
    d = point_to_direction(PhasePoint(1.0))
    assert d.theta == pytest.approx(math.pi / 2)
    assert d.phi == 0.0
    d = point_to_direction(PhasePoint(-2j))
    assert d.theta == pytest.approx(2 * math.atan(2.0))
    assert d.phi == pytest.approx(3 * math.pi / 2)
    d = point_to_direction(INFINITY)
    assert (d.theta, d.phi) == (math.pi, 0.0)


def test_direction_point_round_trip():
    rng = np.random.default_rng(10)
    for _ in range(200):
        theta = rng.uniform(0.0, math.pi - 1e-9)
        phi = rng.uniform(0.0, 2 * math.pi)
        d = Direction(theta, phi)
        back = point_to_direction(direction_to_point(d))
        assert back.theta == pytest.approx(d.theta, abs=1e-12)
        assert back.phi == pytest.approx(d.phi, abs=1e-12)
    assert direction_to_point(Direction(math.pi, 0.3)).infinite


def test_chordal_distance():
    assert chordal_distance(PhasePoint(0j), INFINITY) == pytest.approx(1.0)
    assert chordal_distance(INFINITY, INFINITY) == 0.0
    assert chordal_distance(PhasePoint(1.0), PhasePoint(1.0)) == 0.0
    # equals sin(angle/2): the points sit at theta = 0 and theta = pi/2
    a, b = PhasePoint(0j), PhasePoint(1.0)
    assert chordal_distance(a, b) == pytest.approx(math.sin(math.pi / 4), abs=1e-12)
    # huge moduli stay finite
    assert chordal_distance(PhasePoint(1e200), INFINITY) == pytest.approx(0.0, abs=1e-12)


def test_phase_point_inverse_conjugate():
    assert PhasePoint(0j).inverse_conjugate().infinite
    assert INFINITY.inverse_conjugate().z == 0
    z = PhasePoint(0.5 + 0.5j)
    assert z.inverse_conjugate().z == pytest.approx(1.0 / (0.5 - 0.5j))


# ---------------------------------------------------------------------------
# spin matrices


def test_spin_matrices_half():
    mats = spin_matrices(HALF)
    assert np.allclose(mats.sx, [[0, 0.5], [0.5, 0]])
    assert np.allclose(mats.sy, [[0, -0.5j], [0.5j, 0]])
    assert np.allclose(mats.sz, [[0.5, 0], [0, -0.5]])


def test_spin_matrices_one():
    mats = spin_matrices(ONE)
    assert np.allclose(np.diag(mats.sz), [1.0, 0.0, -1.0])
    splus = mats.sx + 1j * mats.sy
    # coupling from projection 0 to 1 sits in row 0, column 1
    assert splus[0, 1] == pytest.approx(math.sqrt(2.0))


@pytest.mark.parametrize("twos", [1, 2, 3, 5, 7, 10])
def test_spin_matrices_su2_algebra(twos):
    mats = spin_matrices(Spin(twos))
    triples = [(mats.sx, mats.sy, mats.sz), (mats.sy, mats.sz, mats.sx),
               (mats.sz, mats.sx, mats.sy)]
    for a, b, c in triples:
        comm = a @ b - b @ a
        assert np.max(np.abs(comm - 1j * c)) < 1e-12
    for m in (mats.sx, mats.sy, mats.sz):
        assert np.max(np.abs(m - m.conj().T)) < 1e-12


# ---------------------------------------------------------------------------
# coherent states


def test_coherent_state_examples():
    st = coherent_state(ONE, PhasePoint(0j))
    assert np.allclose(st.amplitudes, [1, 0, 0])
    st = coherent_state(HALF, PhasePoint(1.0))
    assert np.allclose(st.amplitudes, [1 / math.sqrt(2)] * 2)
    st = coherent_state(ONE, PhasePoint(1j))
    assert np.allclose(st.amplitudes, np.array([1, math.sqrt(2) * 1j, -1]) / 2)
    st = coherent_state(ONE, INFINITY)
    assert np.allclose(st.amplitudes, [0, 0, 1])


def test_coherent_state_large_modulus_stable():
    st = coherent_state(Spin(10), PhasePoint(1e200))
    assert np.isfinite(st.amplitudes.view(float)).all()
    assert abs(st.amplitudes[-1]) == pytest.approx(1.0)


def test_coherent_state_by_rotation_examples():
    st = coherent_state_by_rotation(ONE, Direction(0.0, 0.0))
    assert fidelity(st, top_state(ONE)) == pytest.approx(1.0)
    a = coherent_state_by_rotation(HALF, Direction(math.pi / 2, 0.0)).canonical()
    b = coherent_state(HALF, PhasePoint(1.0)).canonical()
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) < 1e-12
    a = coherent_state_by_rotation(ONE, Direction(math.pi / 2, math.pi / 2)).canonical()
    b = coherent_state(ONE, PhasePoint(1j)).canonical()
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) < 1e-12


def test_construction_equivalence_random():
    rng = np.random.default_rng(2)
    for _ in range(200):
        twos = int(rng.integers(1, 11))
        theta = rng.uniform(0.0, math.pi)
        phi = rng.uniform(0.0, 2 * math.pi)
        d = Direction(theta, phi)
        a = coherent_state_by_rotation(Spin(twos), d).canonical()
        b = coherent_state(Spin(twos), direction_to_point(d)).canonical()
        assert np.max(np.abs(a.amplitudes - b.amplitudes)) < 1e-10


# ---------------------------------------------------------------------------
# overlap and Husimi


def test_overlap_examples():
    assert overlap(top_state(ONE), PhasePoint(0j)) == pytest.approx(1.0)
    assert overlap(bottom_state(ONE), PhasePoint(0j)) == 0.0
    st = PureState(HALF, np.array([1j, 1.0]) / math.sqrt(2))
    assert abs(overlap(st, PhasePoint(1j))) < 1e-15


def test_overlap_matches_inner_product():
    rng = np.random.default_rng(3)
    for _ in range(100):
        twos = int(rng.integers(1, 9))
        st = random_state(Spin(twos), rng)
        z = complex(rng.normal(scale=2.0), rng.normal(scale=2.0))
        p = PhasePoint(z)
        direct = overlap(st, p)
        brute = np.vdot(st.amplitudes, coherent_state(Spin(twos), p).amplitudes)
        assert abs(direct - brute) < 1e-12


def test_overlap_at_infinity_is_bottom_amplitude():
    rng = np.random.default_rng(4)
    st = random_state(Spin(3), rng)
    assert overlap(st, INFINITY) == pytest.approx(st.amplitudes[-1].conjugate())


def test_husimi_examples():
    rng = np.random.default_rng(5)
    z0 = PhasePoint(0.4 - 0.7j)
    st = coherent_state(Spin(3), z0)
    assert husimi(st, z0) == pytest.approx(1.0)
    assert husimi(bottom_state(ONE), PhasePoint(0j)) == 0.0
    val = husimi(top_state(HALF), direction_to_point(Direction(math.pi / 2, 0.0)))
    assert val == pytest.approx(0.5)
    for _ in range(50):
        st = random_state(Spin(4), rng)
        z = PhasePoint(complex(rng.normal(), rng.normal()))
        assert husimi(st, z) >= 0.0


def test_husimi_infinity():
    rng = np.random.default_rng(6)
    st = random_state(Spin(2), rng)
    assert husimi(st, INFINITY) == pytest.approx(abs(st.amplitudes[-1]) ** 2)


def test_husimi_grid_matches_scalar():
    rng = np.random.default_rng(7)
    st = random_state(Spin(5), rng)
    z = rng.normal(size=20) * 3.0 + 1j * rng.normal(size=20) * 3.0
    grid = husimi_grid(st, z)
    for zi, vi in zip(z, grid):
        assert vi == pytest.approx(husimi(st, PhasePoint(zi)), abs=1e-14)


def test_husimi_states_matches_scalar():
    rng = np.random.default_rng(8)
    states = [random_state(Spin(4), rng) for _ in range(6)]
    mat = np.stack([s.amplitudes for s in states])
    for z in (PhasePoint(0.3 + 0.1j), PhasePoint(-2.5 + 4j), INFINITY):
        vals = husimi_states(mat, 4, z)
        for s, v in zip(states, vals):
            assert v == pytest.approx(husimi(s, z), abs=1e-14)


def test_zero_factorization_identity():
    rng = np.random.default_rng(9)
    for _ in range(10):
        twos = int(rng.integers(1, 9))
        st = random_state(Spin(twos), rng)
        zs = zeros_of(st)
        finite = [p.z for p in zs.zeros if p.finite]
        deficiency = zs.infinity_count
        for _ in range(50):
            z = complex(rng.normal(), rng.normal())
            lhs = abs(overlap(st, PhasePoint(z)))
            prod = zs.scale * np.prod([abs(z - r) for r in finite]) if deficiency == 0 else None
            if deficiency:
                # missing degrees: the factorized form carries the reduced
                # leading coefficient instead of |psi_{-s}|
                lead = abs(
                    st.amplitudes[twos - deficiency].conjugate()
                    * math.sqrt(math.comb(twos, twos - deficiency))
                )
                prod = lead * np.prod([abs(z - r) for r in finite])
            rhs = prod / (1.0 + abs(z) ** 2) ** (twos / 2.0)
            assert abs(lhs - rhs) < 1e-9


# ---------------------------------------------------------------------------
# zeros <-> state


def test_zeros_of_basis_states():
    zs = zeros_of(bottom_state(Spin(4)))
    assert all(p.finite and p.z == 0 for p in zs.zeros)
    assert len(zs.zeros) == 4
    zs = zeros_of(top_state(Spin(4)))
    assert all(p.infinite for p in zs.zeros)


def test_zeros_of_coherent_small_spin():
    # all zeros at -1/conj(z0); exactly representable for a double zero
    zs = zeros_of(coherent_state(HALF, PhasePoint(1.0)))
    assert len(zs.zeros) == 1
    assert abs(zs.zeros[0].z + 1.0) < 1e-10
    zs = zeros_of(coherent_state(ONE, PhasePoint(1.0)))
    for p in zs.zeros:
        assert abs(p.z + 1.0) < 1e-6


def test_zeros_of_residuals():
    rng = np.random.default_rng(11)
    for _ in range(50):
        twos = int(rng.integers(1, 11))
        st = random_state(Spin(twos), rng)
        for p in zeros_of(st).zeros:
            if p.finite:
                assert abs(overlap(st, p)) <= 1e-8


def test_zeros_of_degenerate_input():
    broken = PureState._trusted(ONE, np.zeros(3, dtype=complex))
    with pytest.raises(DegenerateStateError):
        zeros_of(broken)


def test_state_from_zeros_examples():
    st = state_from_zeros(ZeroSet(Spin(4), (PhasePoint(0j),) * 4))
    assert fidelity(st, bottom_state(Spin(4))) == pytest.approx(1.0)
    st = state_from_zeros(ZeroSet(HALF, (PhasePoint(1j),)))
    target = PureState(HALF, np.array([1j, 1.0]) / math.sqrt(2))
    assert fidelity(st, target) == pytest.approx(1.0)
    # canonical form: first significant amplitude real positive
    assert st.amplitudes[0].imag == pytest.approx(0.0, abs=1e-15)
    assert st.amplitudes[0].real > 0


def test_state_from_zeros_coherent_round_trip():
    z0 = PhasePoint(0.7 + 0.3j)
    mirror = PhasePoint(-1.0 / z0.z.conjugate())
    st = state_from_zeros(ZeroSet(Spin(6), (mirror,) * 6))
    assert fidelity(st, coherent_state(Spin(6), z0)) == pytest.approx(1.0, abs=1e-12)


def test_state_from_zeros_cardinality_mismatch():
    with pytest.raises(ValueError):
        ZeroSet(ONE, (PhasePoint(0j),))


def test_round_trip_state_zeros_state():
    rng = np.random.default_rng(12)
    for twos in range(1, 11):
        for _ in range(20):
            st = random_state(Spin(twos), rng)
            back = state_from_zeros(zeros_of(st))
            assert fidelity(st, back) >= 1.0 - 1e-10


def test_round_trip_with_vanishing_bottom_amplitudes():
    rng = np.random.default_rng(13)
    for twos in (2, 4, 6):
        for kill in (1, 2):
            vec = rng.normal(size=twos + 1) + 1j * rng.normal(size=twos + 1)
            vec[-kill:] = 0.0
            st = PureState(Spin(twos), vec)
            zs = zeros_of(st)
            assert zs.infinity_count == kill
            assert fidelity(st, state_from_zeros(zs)) >= 1.0 - 1e-10


def test_match_zero_sets():
    a = ZeroSet(ONE, (PhasePoint(1j), INFINITY))
    b = ZeroSet(ONE, (INFINITY, PhasePoint(1j + 1e-9)))
    assert match_zero_sets(a, b) < 1e-9
    c = ZeroSet(ONE, (PhasePoint(0j), PhasePoint(1.0)))
    assert match_zero_sets(a, c) > 0.1


def test_expand_roots():
    coeffs = expand_roots([2.0, -1.0])
    # (z - 2)(z + 1) = z^2 - z - 2
    assert np.allclose(coeffs, [-2.0, -1.0, 1.0])


# ---------------------------------------------------------------------------
# time reversal and fidelity


def test_time_reverse_examples():
    st = time_reverse(top_state(HALF))
    assert np.allclose(st.amplitudes, [0.0, 1.0])
    st = time_reverse(top_state(ONE))
    assert np.allclose(st.amplitudes, [0.0, 0.0, 1.0])


def test_time_reverse_involution():
    rng = np.random.default_rng(14)
    for twos in (1, 2, 3, 4):
        st = random_state(Spin(twos), rng)
        twice = time_reverse(time_reverse(st))
        sign = (-1.0) ** twos
        assert np.max(np.abs(twice.amplitudes - sign * st.amplitudes)) < 1e-14


def test_fidelity_examples():
    rng = np.random.default_rng(15)
    st = random_state(ONE, rng)
    assert fidelity(st, st) == pytest.approx(1.0)
    assert fidelity(top_state(ONE), bottom_state(ONE)) == 0.0
    f = fidelity(top_state(HALF), coherent_state(HALF, PhasePoint(1.0)))
    assert f == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fidelity(top_state(HALF), top_state(ONE))


def test_normalization_enforced():
    st = PureState(ONE, np.array([3.0, 0.0, 4.0], dtype=complex))
    assert np.linalg.norm(st.amplitudes) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        PureState(ONE, np.array([1.0, 0.0]))
    with pytest.raises(DegenerateStateError):
        PureState(ONE, np.zeros(3))


def test_amplitudes_read_only():
    st = top_state(ONE)
    with pytest.raises(ValueError):
        st.amplitudes[0] = 5.0


# ---------------------------------------------------------------------------
# resolution of identity by quadrature


def quadrature_identity(state: PureState) -> float:
    """(2s+1)/pi integral of the Husimi weight, by Gauss-Legendre x uniform."""
    twos = state.spin.twos
    n_t = twos + 6
    n_phi = 2 * twos + 8
    nodes, weights = np.polynomial.legendre.leggauss(n_t)
    phis = 2 * math.pi * np.arange(n_phi) / n_phi
    total = 0.0
    for t, wt in zip(nodes, weights):
        theta = math.acos(t)
        z = np.tan(theta / 2) * np.exp(1j * phis)
        total += wt * float(np.sum(husimi_grid(state, z)))
    total *= (2 * math.pi / n_phi) * 0.25
    return (twos + 1.0) / math.pi * total


@pytest.mark.parametrize("twos", [1, 2, 5, 8])
def test_resolution_of_identity(twos):
    rng = np.random.default_rng(16 + twos)
    for _ in range(3):
        st = random_state(Spin(twos), rng)
        assert quadrature_identity(st) == pytest.approx(1.0, abs=1e-6)
