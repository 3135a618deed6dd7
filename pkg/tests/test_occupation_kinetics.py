import numpy as np
import pytest
from numpy.testing import assert_allclose

from dephase import (
    FockBasis,
    ModeSpec,
    ProbabilityVector,
    ProcessSpec,
    ValidationError,
    bose_einstein,
    boltzmann_rhs_fermion_boson,
    boltzmann_rhs_three_phonon,
    build_kinetic_q,
    collision_fixed_point,
    collision_rhs,
    diagram_commutativity,
    fermi_dirac,
    geometric_marginal,
    mean_occupation,
    mean_occupations,
    product_state,
    thermal_marginal,
    verify_derivative_consistency,
)


def fb_basis(omega=1.0, n_max=4):
    """Two fermion levels split by omega plus the matching boson mode."""
    return FockBasis([
        ModeSpec.fermion(0.0),
        ModeSpec.fermion(omega),
        ModeSpec.boson(omega, n_max),
    ])


def fb_process(q=1.0):
    return ProcessSpec("fermion-boson", (0, 1, 2), q)


def merge_basis(n_max=4):
    """Three boson modes with energies 1, 2, 3 coupled by 1 + 2 <-> 3."""
    return FockBasis([
        ModeSpec.boson(1.0, n_max),
        ModeSpec.boson(2.0, n_max),
        ModeSpec.boson(3.0, n_max),
    ])


def merge_process(q=1.0):
    return ProcessSpec("three-boson-merge", (0, 1, 2), q)


# ---------------------------------------------------------------- basis

def test_basis_dimension_and_lexicographic_order():
    basis = fb_basis(n_max=2)
    assert basis.dim == 2 * 2 * 3
    assert basis.occupations(0) == (0, 0, 0)
    assert basis.occupations(1) == (0, 0, 1)
    assert basis.occupations(3) == (0, 1, 0)
    assert basis.index((1, 0, 2)) == 8
    table = basis.occupation_table()
    for i in range(basis.dim):
        assert tuple(table[i]) == basis.occupations(i)


def test_mode_spec_validation():
    with pytest.raises(ValidationError):
        ModeSpec("fermion", 1.0, 2)
    with pytest.raises(ValidationError):
        ModeSpec("boson", 1.0, 0)
    with pytest.raises(ValidationError):
        ModeSpec("anyon", 1.0, 1)


def test_process_validation():
    basis = fb_basis()
    with pytest.raises(ValidationError, match="statistics|needs a"):
        ProcessSpec("fermion-boson", (0, 2, 1), 1.0).validate_for(basis)
    with pytest.raises(ValidationError, match="energy"):
        ProcessSpec("three-boson-merge", (0, 1, 2), 1.0).validate_for(
            FockBasis([ModeSpec.boson(1.0, 2), ModeSpec.boson(1.0, 2),
                       ModeSpec.boson(2.5, 2)])
        )
    with pytest.raises(ValidationError, match="nonnegative"):
        ProcessSpec("fermion-boson", (0, 1, 2), -1.0)


# ---------------------------------------------------------------- build_kinetic_q

def test_kinetic_q_fermion_boson_pair_rates():
    q_rate = 0.35
    basis = fb_basis(n_max=5)
    assembly = build_kinetic_q(basis, [fb_process(q_rate)])
    q = assembly.rates.toarray()
    for n in range(1, 6):
        lower = basis.index((1, 0, n))
        upper = basis.index((0, 1, n - 1))
        assert_allclose(q[upper, lower], n * q_rate, rtol=1e-15)
        assert_allclose(q[lower, upper], n * q_rate, rtol=1e-15)


def test_kinetic_q_pauli_blocking():
    basis = fb_basis(n_max=3)
    q = build_kinetic_q(basis, [fb_process()]).rates.toarray()
    blocked = basis.index((1, 1, 2))  # both levels occupied: nothing moves
    column = q[:, blocked].copy()
    column[blocked] = 0.0
    assert np.all(column == 0.0)


def test_kinetic_q_merge_coefficients():
    q_rate = 0.6
    basis = merge_basis(n_max=4)
    q = build_kinetic_q(basis, [merge_process(q_rate)]).rates.toarray()
    source = basis.index((2, 3, 1))
    target = basis.index((1, 2, 2))
    assert_allclose(q[target, source], q_rate * 2 * 3 * 2, rtol=1e-15)
    assert_allclose(q[source, target], q_rate * 2 * 3 * 2, rtol=1e-15)


def test_kinetic_q_decay_coefficients():
    basis = FockBasis([
        ModeSpec.boson(3.0, 4),
        ModeSpec.boson(1.0, 4),
        ModeSpec.boson(2.0, 4),
    ])
    q = build_kinetic_q(
        basis, [ProcessSpec("three-boson-decay", (0, 1, 2), 0.5)]
    ).rates.toarray()
    source = basis.index((2, 1, 0))
    target = basis.index((1, 2, 1))
    assert_allclose(q[target, source], 0.5 * 2 * 2 * 1, rtol=1e-15)


def test_kinetic_q_counts_truncated_pairs():
    basis = merge_basis(n_max=3)
    assembly = build_kinetic_q(basis, [merge_process()])
    # merges from states with n3 at the cap are dropped; count them directly
    table = basis.occupation_table()
    expected = np.count_nonzero(
        (table[:, 0] >= 1) & (table[:, 1] >= 1) & (table[:, 2] == 3)
    )
    assert assembly.truncated_pairs == (expected,)
    assert assembly.total_truncated == expected


def test_kinetic_q_is_valid_generator_and_energy_conserving():
    basis = fb_basis(n_max=4)
    assembly = build_kinetic_q(basis, [fb_process(0.7)])
    q = assembly.rates.toarray()
    assert np.array_equal(q, q.T)
    assert np.abs(q.sum(axis=0)).max() < 1e-12
    energies = basis.state_energies()
    rows, cols = np.nonzero(q)
    off = rows != cols
    assert np.abs(energies[rows[off]] - energies[cols[off]]).max() <= 1e-9


def test_kinetic_q_goes_sparse_for_large_bases():
    basis = FockBasis([ModeSpec.boson(1.0, 9), ModeSpec.boson(2.0, 9),
                       ModeSpec.boson(3.0, 9)])
    assembly = build_kinetic_q(basis, [merge_process()])
    assert assembly.rates.is_sparse
    assert assembly.rates.dim == 1000


def test_kinetic_q_rejects_wrong_statistics():
    basis = merge_basis()
    with pytest.raises(ValidationError, match="needs a fermion"):
        build_kinetic_q(basis, [ProcessSpec("fermion-boson", (0, 1, 2), 1.0)])


# ---------------------------------------------------------------- means and products

def test_mean_occupation_delta_state():
    basis = fb_basis(n_max=2)
    p = ProbabilityVector.delta(basis.dim, basis.index((1, 0, 0)))
    assert mean_occupation(p, basis, 0) == 1.0
    assert mean_occupation(p, basis, 1) == 0.0


def test_mean_occupation_uniform_pair():
    basis = FockBasis([ModeSpec.fermion(0.0), ModeSpec.fermion(0.0)])
    entries = np.zeros(basis.dim)
    entries[basis.index((1, 0))] = 0.5
    entries[basis.index((0, 1))] = 0.5
    p = ProbabilityVector(entries)
    assert mean_occupation(p, basis, 0) == 0.5


def test_mean_occupation_truncated_geometric():
    n_max, ratio = 7, 0.35
    basis = FockBasis([ModeSpec.boson(1.0, n_max)])
    marginal = geometric_marginal(ratio, n_max)
    p = ProbabilityVector(marginal)
    # brute-force oracle: sum n x^n (1 - x) / (1 - x^(n_max + 1))
    expected = sum(
        n * ratio**n * (1 - ratio) / (1 - ratio ** (n_max + 1))
        for n in range(n_max + 1)
    )
    assert abs(mean_occupation(p, basis, 0) - expected) < 1e-14


def test_product_state_vacuum_and_fermion_pair():
    basis = FockBasis([ModeSpec.fermion(0.0), ModeSpec.fermion(0.0)])
    vac = product_state(basis, [[1.0, 0.0], [1.0, 0.0]])
    assert vac.entries[basis.index((0, 0))] == 1.0
    f = 0.3
    p = product_state(basis, [[1 - f, f], [1 - f, f]])
    assert_allclose(p.entries[basis.index((1, 1))], f * f)


def test_product_state_reproduces_marginal_means():
    basis = fb_basis(n_max=6)
    marginals = [
        np.array([0.7, 0.3]),
        np.array([0.4, 0.6]),
        thermal_marginal(1.0, 0.8, 6),
    ]
    p = product_state(basis, marginals)
    means = mean_occupations(p, basis).values
    for i, marginal in enumerate(marginals):
        expected = float(marginal @ np.arange(marginal.size))
        assert abs(means[i] - expected) < 1e-12


def test_product_state_validates_marginals():
    basis = fb_basis(n_max=2)
    with pytest.raises(ValidationError, match="length"):
        product_state(basis, [[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValidationError, match="sums"):
        product_state(basis, [[0.9, 0.0], [1.0, 0.0], [1.0, 0.0, 0.0]])


# ---------------------------------------------------------------- collision integrals

def test_fermion_boson_rhs_pauli_blocked():
    assert boltzmann_rhs_fermion_boson(1.0, 1.0, 3.0, 2.0) == 0.0


def test_fermion_boson_rhs_spontaneous_emission():
    assert boltzmann_rhs_fermion_boson(0.0, 1.0, 0.0, 0.8) == 0.8


def test_three_phonon_rhs_trivial_values():
    assert boltzmann_rhs_three_phonon(0.0, 0.0, 0.0, 1.0, "merge") == 0.0
    assert boltzmann_rhs_three_phonon(0.0, 0.0, 1.0, 1.0, "merge") == 1.0


def test_rhs_domain_validation():
    with pytest.raises(ValidationError):
        boltzmann_rhs_fermion_boson(1.5, 0.5, 1.0, 1.0)
    with pytest.raises(ValidationError):
        boltzmann_rhs_three_phonon(-0.1, 0.0, 0.0, 1.0, "merge")
    with pytest.raises(ValidationError, match="channel"):
        boltzmann_rhs_three_phonon(0.0, 0.0, 0.0, 1.0, "both")


def test_fermion_boson_rhs_vanishes_at_equilibrium():
    # emission fills the lower level: the zero requires e2 = e1 + omega
    temperature, mu, omega, e1 = 0.7, 0.3, 0.5, -0.2
    f1 = fermi_dirac(e1, mu, temperature)
    f2 = fermi_dirac(e1 + omega, mu, temperature)
    n_b = bose_einstein(omega, temperature)
    assert abs(boltzmann_rhs_fermion_boson(f1, f2, n_b, 1.0)) < 1e-12


def test_three_phonon_rhs_vanishes_at_equilibrium():
    temperature = 1.0
    w = (0.4, 0.6, 1.0)
    n = [bose_einstein(wi, temperature) for wi in w]
    assert abs(boltzmann_rhs_three_phonon(*n, 1.0, "merge")) < 1e-12
    n_decay = [bose_einstein(wi, temperature) for wi in (1.0, 0.4, 0.6)]
    assert abs(boltzmann_rhs_three_phonon(*n_decay, 1.0, "decay")) < 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_equilibrium_residuals_random_parameters(seed):
    rng = np.random.default_rng(seed)
    temperature = rng.uniform(0.3, 4.0)
    mu = rng.uniform(-1.0, 1.0)
    omega = rng.uniform(0.1, 2.5)
    e1 = rng.uniform(-1.0, 1.0)
    f1 = fermi_dirac(e1, mu, temperature)
    f2 = fermi_dirac(e1 + omega, mu, temperature)
    assert abs(
        boltzmann_rhs_fermion_boson(f1, f2, bose_einstein(omega, temperature), 1.0)
    ) < 1e-12
    w1, w2 = rng.uniform(0.1, 2.0, size=2)
    n = [bose_einstein(w, temperature) for w in (w1, w2, w1 + w2)]
    assert abs(boltzmann_rhs_three_phonon(*n, 1.0, "merge")) < 1e-12


# ---------------------------------------------------------------- derivative consistency

def test_consistency_no_processes():
    basis = fb_basis(n_max=3)
    p0 = product_state(basis, [[1.0, 0.0], [1.0, 0.0], geometric_marginal(0.3, 3)])
    report = verify_derivative_consistency(basis, [], p0)
    assert_allclose(report.exact, np.zeros(3), atol=0)
    assert_allclose(report.collision, np.zeros(3), atol=0)


def test_consistency_two_level_plus_boson():
    n_max = 60
    basis = fb_basis(n_max=n_max)
    marginals = [
        np.array([0.7, 0.3]),
        np.array([0.4, 0.6]),
        geometric_marginal(1.0 / 3.0, n_max),  # untruncated mean 0.5
    ]
    p0 = product_state(basis, marginals)
    report = verify_derivative_consistency(basis, [fb_process(0.9)], p0)
    assert report.max_discrepancy < 1e-8
    assert np.all(report.marginal_tail < 1e-12)


def test_consistency_three_phonon_small():
    basis = merge_basis(n_max=25)
    marginals = [thermal_marginal(w, 0.45, 25) for w in (1.0, 2.0, 3.0)]
    p0 = product_state(basis, marginals)
    report = verify_derivative_consistency(basis, [merge_process(0.8)], p0)
    assert report.max_discrepancy < 1e-8


def test_consistency_discrepancy_tracks_cap_mass():
    # fatter-tailed marginal: halving the cap mass at least halves the error
    results = {}
    for n_max in (6, 12):
        basis = fb_basis(n_max=n_max)
        marginals = [
            np.array([0.7, 0.3]),
            np.array([0.4, 0.6]),
            geometric_marginal(1.0 / 3.0, n_max),
        ]
        report = verify_derivative_consistency(
            basis, [fb_process(1.0)], product_state(basis, marginals)
        )
        results[n_max] = report
    tail_ratio = results[12].marginal_tail[2] / results[6].marginal_tail[2]
    disc_ratio = results[12].max_discrepancy / results[6].max_discrepancy
    assert disc_ratio <= tail_ratio * (1.0 + 1e-9)


def test_consistency_refuses_correlated_states():
    basis = FockBasis([ModeSpec.fermion(0.0), ModeSpec.fermion(0.0)])
    entries = np.zeros(basis.dim)
    entries[basis.index((1, 0))] = 0.5
    entries[basis.index((0, 1))] = 0.5  # maximally anticorrelated
    with pytest.raises(ValidationError, match="product"):
        verify_derivative_consistency(basis, [], ProbabilityVector(entries))


# ---------------------------------------------------------------- fixed points and diagram

def test_collision_fixed_point_preserves_invariants():
    basis = merge_basis(n_max=6)
    means0 = np.array([2.0, 1.0, 2.0])
    fixed = collision_fixed_point(basis.modes, [merge_process()], means0)
    assert np.abs(collision_rhs([merge_process()], fixed)).max() < 1e-10
    # conserved: N1 - N2 and total energy
    assert abs((fixed[0] - fixed[1]) - (means0[0] - means0[1])) < 1e-9
    energy = np.array([1.0, 2.0, 3.0])
    assert abs(energy @ fixed - energy @ means0) < 1e-8


def test_diagram_trivial_single_state_shell():
    basis = merge_basis(n_max=3)
    report = diagram_commutativity(basis, [merge_process()], anchor=(0, 0, 0))
    assert report.component_sizes[0] == 1
    assert_allclose(report.means_master, [0.0, 0.0, 0.0], atol=0)
    assert_allclose(report.means_collision, [0.0, 0.0, 0.0], atol=1e-10)
    assert report.gap < 1e-10


def test_diagram_single_process_shell():
    basis = fb_basis(n_max=6)
    report = diagram_commutativity(basis, [fb_process(0.5)], anchor=(0, 1, 2))
    # the anchor only talks to <1, 0, 3>; both paths are tiny brute-force runs
    assert report.component_sizes[0] == 2
    assert report.stationarity_deviation < 1e-8
    assert_allclose(report.means_master, [0.5, 0.5, 2.5], atol=1e-8)
    # collision fixed point on the conservation manifold of (0, 1, 2)
    fixed = report.means_collision
    assert abs(fixed[0] + fixed[1] - 1.0) < 1e-9
    assert abs((fixed[2] - fixed[0]) - 2.0) < 1e-9
    assert report.gap == pytest.approx(
        np.abs(report.means_master - fixed).max(), abs=0
    )
    assert 0.0 < report.gap < 0.2


def test_diagram_reports_other_components():
    basis = fb_basis(n_max=6)
    # shell energy 3: anchor component plus e.g. <1, 1, 2> (blocked) and <0, 0, 3>
    report = diagram_commutativity(basis, [fb_process(0.5)], anchor=(0, 1, 2))
    assert report.shell_size > sum(report.component_sizes[:1])
    assert len(report.component_sizes) == 1 + len(report.component_means)


def test_mean_occupations_stay_in_range_along_evolution():
    from dephase import evolve_master

    basis = fb_basis(n_max=5)
    assembly = build_kinetic_q(basis, [fb_process(1.0)])
    p = product_state(
        basis, [[0.2, 0.8], [0.6, 0.4], geometric_marginal(0.4, 5)]
    )
    for t in (0.1, 0.5, 2.0):
        out = evolve_master(assembly.rates, p, t)
        means = mean_occupations(out, basis).values
        assert means.min() >= -1e-10
        assert means[0] <= 1.0 + 1e-10 and means[1] <= 1.0 + 1e-10
