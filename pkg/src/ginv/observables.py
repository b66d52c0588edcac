"""Invariant measurement operators and their reduced-purity oracles.

All observables act on k copies of an n-qubit register and are built as
explicit dense matrices. Copy A occupies qubits 0..n-1 and copy B qubits
n..2n-1 of the doubled register.

Each entanglement observable has a companion ``*_oracle`` evaluating the
same quantity from reduced-state purities via partial traces; tests hold
the two routes against each other.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import tensor
from .groups import permutation_operator
from .tensor import ATOL, bell_state, dm, kron_all, num_qubits, partial_trace

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass
class Observable:
    """A Hermitian operator on k copies of an n-qubit register."""

    matrix: np.ndarray = field(repr=False)
    copies: int
    qubits_per_copy: int
    tag: str

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix)
        expected = (2**self.qubits_per_copy) ** self.copies
        if self.matrix.shape != (expected, expected):
            raise ValueError(
                f"{self.tag}: dimension {self.matrix.shape} != {expected}"
            )
        if not tensor.is_hermitian(self.matrix, ATOL):
            raise ValueError(f"{self.tag}: matrix is not Hermitian")

    @property
    def dim(self):
        return self.matrix.shape[0]

    def expectation(self, rho):
        """Tr[rho^(x copies) matrix] for a single-register state rho."""
        return tensor.expectation_copies(rho, self.copies, self.matrix)


def swap_operator(n):
    """Register SWAP between two copies of n qubits; <SWAP> = Tr[rho^2]."""
    m = permutation_operator((1, 0), target="copies", qubits_per_copy=n).matrix
    return Observable(m, copies=2, qubits_per_copy=n, tag="swap")


def _swap_j_matrix(j, n):
    if not 0 <= j < n:
        raise ValueError(f"qubit index {j} out of range for n={n}")
    perm = list(range(2 * n))
    perm[j], perm[n + j] = perm[n + j], perm[j]
    return permutation_operator(perm, target="qubits").matrix


def swap_j(j, n):
    """SWAP of the j-th qubits of the two copies; <swap_j> = Tr[rho_j^2]."""
    return Observable(
        _swap_j_matrix(j, n), copies=2, qubits_per_copy=n, tag=f"swap_{j}"
    )


def bell_projector(n):
    """Rank-1 projector onto the unit-normalised Bell state on 2n qubits."""
    return Observable(
        dm(bell_state(n)), copies=2, qubits_per_copy=n, tag="bell_projector"
    )


def impurity_observable(j, n):
    """2(1 - SWAP_j); expectation is twice the impurity of the j-th marginal."""
    eye = np.eye(4**n)
    m = 2.0 * (eye - _swap_j_matrix(j, n))
    return Observable(m, copies=2, qubits_per_copy=n, tag=f"impurity_{j}")


def meyer_wallach_observable(n):
    """(2/n) sum_j (1 - SWAP_j), the average single-qubit impurity measure."""
    eye = np.eye(4**n)
    m = (2.0 / n) * sum(eye - _swap_j_matrix(j, n) for j in range(n))
    return Observable(m, copies=2, qubits_per_copy=n, tag="meyer_wallach")


def concentratable_observable(q_set, n):
    """1 - 2^-|Q| prod_{j in Q} (1 + SWAP_j) for a nonempty qubit subset Q.

    Expectation equals 1 - 2^-|Q| sum_{a subset of Q} Tr[rho_a^2].
    """
    q_set = sorted(set(int(q) for q in q_set))
    if not q_set:
        raise ValueError("concentratable observable requires a nonempty subset")
    eye = np.eye(4**n)
    prod = eye
    for j in q_set:
        prod = prod @ (eye + _swap_j_matrix(j, n))
    m = eye - prod / 2 ** len(q_set)
    return Observable(
        m, copies=2, qubits_per_copy=n, tag=f"concentratable_{q_set}"
    )


def ntangle_observable(n):
    """1 - 2^-n prod_j (1 - SWAP_j); a signed-purity entanglement measure."""
    eye = np.eye(4**n)
    prod = eye
    for j in range(n):
        prod = prod @ (eye - _swap_j_matrix(j, n))
    m = eye - prod / 2**n
    return Observable(m, copies=2, qubits_per_copy=n, tag="ntangle")


def pauli_string(word):
    """Tensor product of Pauli operators, e.g. "YZX".

    Returns (observable, odd_y) where odd_y flags an odd number of Y
    factors, i.e. a purely imaginary (skew-symmetric times i) operator.
    """
    word = word.upper()
    if not word or any(c not in PAULI for c in word):
        raise ValueError(f"invalid Pauli string {word!r}")
    m = kron_all([PAULI[c] for c in word])
    odd_y = word.count("Y") % 2 == 1
    obs = Observable(m, copies=1, qubits_per_copy=len(word), tag=word)
    return obs, odd_y


def hermitize(a, copies=1):
    """Hermitian and anti-Hermitian parts (A + A^dag)/2 and i(A - A^dag)/2.

    Both parts commute with everything A commutes with, so they stay
    inside any commutant containing A.
    """
    a = np.asarray(a)
    n = num_qubits(a.shape[0]) // copies
    re = (a + a.conj().T) / 2
    im = 1j * (a - a.conj().T) / 2
    return (
        Observable(re, copies=copies, qubits_per_copy=n, tag="hermitize_re"),
        Observable(im, copies=copies, qubits_per_copy=n, tag="hermitize_im"),
    )


def ghz_state(n):
    """(|0...0> + |1...1>)/sqrt(2)."""
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    return psi


def w_state(n):
    """Equal superposition of the n single-excitation basis states."""
    psi = np.zeros(2**n, dtype=complex)
    for j in range(n):
        psi[2 ** (n - 1 - j)] = 1 / np.sqrt(n)
    return psi


def subset_purity(rho, subset):
    """Tr[rho_a^2] of the marginal on ``subset``; the empty subset gives 1."""
    reduced = partial_trace(rho, subset)
    return float(np.real(np.einsum("ij,ji->", reduced, reduced)))


def impurity_oracle(rho, j):
    return 2.0 * (1.0 - subset_purity(rho, [j]))


def meyer_wallach_oracle(rho):
    n = num_qubits(rho.shape[0])
    return (2.0 / n) * sum(1.0 - subset_purity(rho, [j]) for j in range(n))


def concentratable_oracle(rho, q_set):
    q_set = sorted(set(q_set))
    if not q_set:
        raise ValueError("concentratable oracle requires a nonempty subset")
    total = 0.0
    for r in range(len(q_set) + 1):
        for alpha in combinations(q_set, r):
            total += subset_purity(rho, alpha)
    return 1.0 - total / 2 ** len(q_set)


def ntangle_oracle(rho):
    n = num_qubits(rho.shape[0])
    total = 0.0
    for r in range(n + 1):
        for alpha in combinations(range(n), r):
            total += (-1) ** r * subset_purity(rho, alpha)
    return 1.0 - total / 2**n


ENTANGLEMENT_MEASURES = {
    "impurity": lambda rho: impurity_oracle(rho, 0),
    "meyer_wallach": meyer_wallach_oracle,
    "concentratable": lambda rho: concentratable_oracle(
        rho, range(num_qubits(rho.shape[0]))
    ),
    "ntangle": ntangle_oracle,
}


def entanglement_observable(measure, n):
    """Observable for a named entanglement measure tag."""
    if measure == "impurity":
        return impurity_observable(0, n)
    if measure == "meyer_wallach":
        return meyer_wallach_observable(n)
    if measure == "concentratable":
        return concentratable_observable(range(n), n)
    if measure == "ntangle":
        return ntangle_observable(n)
    raise ValueError(f"unknown entanglement measure {measure!r}")
