from itertools import combinations

import numpy as np
import pytest

from ginv import observables as obs
from ginv.groups import (
    LocalUnitarySampler,
    OrthogonalSampler,
    UnitarySampler,
    haar_unitary,
)
from ginv.tensor import (
    dm,
    kron,
    kron_all,
    partial_trace,
    purity,
    random_statevector,
    zero_state,
)


def product_state(n, rng):
    return kron_all([random_statevector(2, rng) for _ in range(n)])


def test_swap_operator_involution():
    s = obs.swap_operator(2).matrix
    np.testing.assert_array_equal(s @ s, np.eye(16))


def test_swap_operator_purity_values():
    assert abs(obs.swap_operator(1).expectation(np.eye(2) / 2) - 0.5) < 1e-12
    rng = np.random.default_rng(0)
    psi = random_statevector(2, rng)
    assert abs(obs.swap_operator(1).expectation(dm(psi)) - 1.0) < 1e-10


def test_swap_operator_direct_purity_oracle():
    rho = np.diag([0.75, 0.25]).astype(complex)
    oracle = np.real(np.trace(rho @ rho))
    got = obs.swap_operator(1).expectation(rho)
    assert abs(got - oracle) < 1e-12
    assert abs(got - 0.625) < 1e-12


def test_swap_operator_random_states():
    rng = np.random.default_rng(1)
    for n in (1, 2):
        swap = obs.swap_operator(n)
        for _ in range(10):
            rho = dm(random_statevector(2**n, rng)) * 0.7 + 0.3 * np.eye(2**n) / 2**n
            assert abs(swap.expectation(rho) - purity(rho)) < 1e-10


def test_swap_j_product_state():
    rng = np.random.default_rng(2)
    rho = dm(product_state(3, rng))
    for j in range(3):
        assert abs(obs.swap_j(j, 3).expectation(rho) - 1.0) < 1e-10


def test_swap_j_ghz_marginals():
    # oracle: purity of the reduced state from an explicit partial trace
    for n, j in ((2, 0), (3, 2)):
        rho = dm(obs.ghz_state(n))
        marginal = partial_trace(rho, [j])
        oracle = np.real(np.trace(marginal @ marginal))
        got = obs.swap_j(j, n).expectation(rho)
        assert abs(got - oracle) < 1e-10
        assert abs(got - 0.5) < 1e-12


def test_swap_j_index_error():
    with pytest.raises(ValueError):
        obs.swap_j(3, 3)


def test_bell_projector_is_rank_one_projector():
    for n in (1, 2):
        p = obs.bell_projector(n).matrix
        np.testing.assert_allclose(p @ p, p, atol=1e-12)
        assert abs(np.trace(p) - 1) < 1e-12


def test_bell_projector_real_pure_states():
    # ricochet oracle: for a real unit vector, sum_j psi_j^2 = 1, so the
    # overlap with the unit-normalised Bell state gives exactly 1/d
    rng = np.random.default_rng(3)
    for n in (1, 2):
        d = 2**n
        bell = obs.bell_projector(n)
        for _ in range(10):
            psi = rng.standard_normal(d)
            psi = (psi / np.linalg.norm(psi)).astype(complex)
            assert abs(bell.expectation(dm(psi)) - 1.0 / d) < 1e-10


def test_bell_projector_imaginary_state_zero():
    # oracle: sum_j psi_j^2 = (1 + i^2)/2 = 0 for (|0> + i|1>)/sqrt(2)
    psi = np.array([1.0, 1.0j]) / np.sqrt(2)
    amp_sum = (psi**2).sum()
    assert abs(amp_sum) < 1e-14
    assert abs(obs.bell_projector(1).expectation(dm(psi))) < 1e-12


def test_impurity_observable():
    rng = np.random.default_rng(4)
    rho = dm(product_state(2, rng))
    assert abs(obs.impurity_observable(0, 2).expectation(rho)) < 1e-10
    assert abs(obs.impurity_observable(0, 2).expectation(dm(obs.ghz_state(2))) - 1.0) < 1e-10
    assert abs(obs.impurity_observable(1, 3).expectation(dm(obs.ghz_state(3))) - 1.0) < 1e-10


def test_meyer_wallach_reference_values():
    rng = np.random.default_rng(5)
    assert abs(obs.meyer_wallach_observable(3).expectation(dm(product_state(3, rng)))) < 1e-10
    for n in (2, 3, 4):
        got = obs.meyer_wallach_observable(n).expectation(dm(obs.ghz_state(n)))
        assert abs(got - 1.0) < 1e-10
    # oracle: every single-qubit marginal of W3 has purity 5/9
    w3 = dm(obs.w_state(3))
    marg = partial_trace(w3, [0])
    assert abs(np.real(np.trace(marg @ marg)) - 5 / 9) < 1e-12
    assert abs(obs.meyer_wallach_observable(3).expectation(w3) - 8 / 9) < 1e-10


def test_concentratable_reference_values():
    rng = np.random.default_rng(6)
    assert abs(obs.concentratable_observable([0, 1], 2).expectation(dm(product_state(2, rng)))) < 1e-10
    # oracle: purity sum over the subset lattice, computed inline
    bell_pair = dm(obs.ghz_state(2))
    sums = sum(
        np.real(np.trace(partial_trace(bell_pair, a) @ partial_trace(bell_pair, a)))
        for r in range(3)
        for a in combinations(range(2), r)
    )
    oracle = 1.0 - sums / 4.0
    got = obs.concentratable_observable([0, 1], 2).expectation(bell_pair)
    assert abs(got - oracle) < 1e-12
    assert abs(got - 0.25) < 1e-12
    ghz3 = dm(obs.ghz_state(3))
    got3 = obs.concentratable_observable([0, 1, 2], 3).expectation(ghz3)
    assert abs(got3 - 0.375) < 1e-12


def test_concentratable_rejects_empty_subset():
    with pytest.raises(ValueError):
        obs.concentratable_observable([], 2)
    with pytest.raises(ValueError):
        obs.concentratable_oracle(np.eye(4) / 4, [])


def test_ntangle_reference_values():
    # oracle: signed purity sums computed from the definitions
    bell_pair = dm(obs.ghz_state(2))
    assert abs(obs.ntangle_observable(2).expectation(bell_pair) - 0.75) < 1e-12
    zero2 = dm(zero_state(2))
    assert abs(obs.ntangle_observable(2).expectation(zero2) - 1.0) < 1e-12
    rng = np.random.default_rng(7)
    psi = random_statevector(2, rng)
    assert abs(obs.ntangle_observable(1).expectation(dm(psi)) - 1.0) < 1e-10


def test_pauli_string_flags():
    y, flag = obs.pauli_string("Y")
    assert flag
    assert np.abs(y.matrix.real).max() < 1e-15  # purely imaginary entries
    yy, flag = obs.pauli_string("YY")
    assert not flag
    assert np.abs(yy.matrix.imag).max() < 1e-15
    yzx, flag = obs.pauli_string("YZX")
    assert flag
    np.testing.assert_allclose(yzx.matrix @ yzx.matrix, np.eye(8), atol=1e-14)


def test_pauli_string_invalid():
    with pytest.raises(ValueError):
        obs.pauli_string("XQ")


def test_hermitize_hermitian_input():
    re, im = obs.hermitize(obs.PAULI["X"])
    np.testing.assert_allclose(re.matrix, obs.PAULI["X"])
    np.testing.assert_allclose(im.matrix, np.zeros((2, 2)), atol=1e-14)


def test_hermitize_ketbra():
    a = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
    re, im = obs.hermitize(a)
    np.testing.assert_allclose(re.matrix, obs.PAULI["X"] / 2)
    np.testing.assert_allclose(im.matrix, -obs.PAULI["Y"] / 2)


def test_hermitize_stays_in_commutant():
    # non-Hermitian element of span{1, SWAP}: both outputs must still
    # commute with V x V for sampled unitaries
    rng = np.random.default_rng(8)
    swap = obs.swap_operator(1).matrix
    a = (0.3 + 0.4j) * np.eye(4) + (1.1 - 0.2j) * swap
    re, im = obs.hermitize(a, copies=2)
    for _ in range(20):
        v = haar_unitary(2, rng)
        vv = kron(v, v)
        for part in (re.matrix, im.matrix):
            assert np.linalg.norm(part @ vv - vv @ part) < 1e-9


def test_unitary_invariance_of_swap_span():
    rng = np.random.default_rng(9)
    o = 0.7 * np.eye(4) + 1.3 * obs.swap_operator(1).matrix
    rho = dm(random_statevector(2, rng)) * 0.6 + 0.4 * np.eye(2) / 2
    from ginv.tensor import expectation_copies

    base = expectation_copies(rho, 2, o)
    for _ in range(100):
        v = haar_unitary(2, rng)
        conj = v @ rho @ v.conj().T
        assert abs(expectation_copies(conj, 2, o) - base) < 1e-9


def test_local_unitary_invariance_all_measures():
    from ginv.groups import check_invariance

    rng = np.random.default_rng(10)
    n = 2
    rho = dm(random_statevector(4, rng))
    measures = [
        obs.impurity_observable(0, n),
        obs.meyer_wallach_observable(n),
        obs.concentratable_observable(range(n), n),
        obs.ntangle_observable(n),
        obs.swap_j(1, n),
    ]
    for i, observable in enumerate(measures):
        report = check_invariance(
            lambda r, o=observable: o.expectation(r),
            LocalUnitarySampler(n, 100 + i),
            rho,
            trials=100,
        )
        assert report.passed, observable.tag


def test_orthogonal_invariance_and_unitary_witness():
    from ginv.groups import check_invariance

    rng = np.random.default_rng(11)
    real_vec = rng.standard_normal(2)
    rho = dm((real_vec / np.linalg.norm(real_vec)).astype(complex))
    bell = obs.bell_projector(1)
    ortho = check_invariance(
        lambda r: bell.expectation(r), OrthogonalSampler(2, 12), rho, trials=100
    )
    assert ortho.passed
    unitary = check_invariance(
        lambda r: bell.expectation(r), UnitarySampler(2, 13), rho, trials=50
    )
    assert unitary.max_deviation > 1e-3


def test_oracle_equivalence_random_pure_states():
    rng = np.random.default_rng(12)
    for n in (2, 3, 4):
        built = {
            "impurity": (obs.impurity_observable(0, n), lambda r: obs.impurity_oracle(r, 0)),
            "meyer_wallach": (obs.meyer_wallach_observable(n), obs.meyer_wallach_oracle),
            "concentratable": (
                obs.concentratable_observable(range(n), n),
                lambda r, nn=n: obs.concentratable_oracle(r, range(nn)),
            ),
            "ntangle": (obs.ntangle_observable(n), obs.ntangle_oracle),
            "swap_j": (obs.swap_j(0, n), lambda r: obs.subset_purity(r, [0])),
        }
        for _ in range(50 // 10):
            rho = dm(random_statevector(2**n, rng))
            for tag, (observable, oracle) in built.items():
                assert abs(observable.expectation(rho) - oracle(rho)) < 1e-9, tag


def test_entanglement_separation():
    rng = np.random.default_rng(13)
    for n in (2, 3, 4):
        conc = obs.concentratable_observable(range(n), n)
        assert conc.expectation(dm(obs.ghz_state(n))) > 0.2
        assert abs(conc.expectation(dm(product_state(n, rng)))) < 1e-10


def test_observable_validation():
    with pytest.raises(ValueError):
        obs.Observable(np.array([[0, 1], [0, 0]]), 1, 1, "bad")
    with pytest.raises(ValueError):
        obs.Observable(np.eye(3), 1, 1, "bad-dim")


def test_reference_states():
    ghz = obs.ghz_state(3)
    assert abs(np.linalg.norm(ghz) - 1) < 1e-12
    assert abs(ghz[0] - ghz[-1]) < 1e-12
    w = obs.w_state(3)
    assert abs(np.linalg.norm(w) - 1) < 1e-12
    assert abs(w[1] - w[2]) < 1e-12 and abs(w[2] - w[4]) < 1e-12
