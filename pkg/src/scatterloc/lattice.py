"""Bosonic Fock basis on a 1D lattice, Bose-Hubbard Hamiltonian, ground state.

Sites sit on a line at positions (j-1)*a for j = 1..M; the site spacing a
is fixed to 1 internally and all energies are in units of the tunneling J
unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg


class Boundary(str, Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class CapacityError(Exception):
    """Fock-space dimension exceeds the configured maximum."""


class EigensolverError(Exception):
    """Dense symmetric eigensolver failed to converge."""


@dataclass(frozen=True)
class LatticeSpec:
    """M lattice sites on a line holding N bosons."""

    M: int
    N: int
    boundary: Boundary = Boundary.OPEN
    a: float = 1.0

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"site count M must be >= 1, got {self.M}")
        if self.N < 1:
            raise ValueError(f"atom count N must be >= 1, got {self.N}")
        if self.boundary == Boundary.PERIODIC and self.M <= 2:
            # the wrap-around bond would duplicate an open bond
            raise ValueError("periodic boundary requires M >= 3")
        if not (self.a > 0):
            raise ValueError(f"site spacing must be positive, got {self.a}")

    @property
    def bonds(self) -> tuple[tuple[int, int], ...]:
        """Nearest-neighbour site pairs (0-based)."""
        pairs = [(j, j + 1) for j in range(self.M - 1)]
        if self.boundary == Boundary.PERIODIC:
            pairs.append((self.M - 1, 0))
        return tuple(pairs)


@dataclass(frozen=True)
class HubbardParams:
    """Tunneling energy J and on-site interaction U."""

    J: float
    U: float

    def __post_init__(self):
        if not (self.J >= 0):
            raise ValueError(f"tunneling J must be >= 0, got {self.J}")
        if not math.isfinite(self.U):
            raise ValueError(f"interaction U must be finite, got {self.U}")


def fock_dimension(M: int, N: int) -> int:
    """Number of ways to place N bosons on M sites (stars and bars)."""
    return math.comb(N + M - 1, N)


def _occupations_desc(n: int, m: int):
    """Yield all length-m occupation tuples summing to n, in descending
    lexicographic order."""
    if m == 1:
        yield (n,)
        return
    for head in range(n, -1, -1):
        for tail in _occupations_desc(n - head, m - 1):
            yield (head,) + tail


class FockBasis:
    """Ordered number basis of the N-boson sector on M sites.

    States are kept in descending lexicographic order of their occupation
    tuples, which makes indices (and everything derived from them)
    reproducible across runs.
    """

    def __init__(self, spec: LatticeSpec, states: list[tuple[int, ...]]):
        self.spec = spec
        self.states = states
        self.dimension = len(states)
        self.occupations = np.array(states, dtype=np.int64)
        self.occupations.setflags(write=False)
        self._index = {occ: i for i, occ in enumerate(states)}

    def index_of(self, occ) -> int:
        """Basis index of an occupation tuple; raises ValueError if absent."""
        key = tuple(int(n) for n in occ)
        try:
            return self._index[key]
        except KeyError:
            raise ValueError(f"occupation {key} is not a basis state "
                             f"of M={self.spec.M}, N={self.spec.N}") from None

    def __len__(self) -> int:
        return self.dimension

    def __eq__(self, other) -> bool:
        return isinstance(other, FockBasis) and self.spec == other.spec

    def __hash__(self):
        return hash(self.spec)

    def __repr__(self) -> str:
        return (f"FockBasis(M={self.spec.M}, N={self.spec.N}, "
                f"D={self.dimension})")


def enumerate_basis(spec: LatticeSpec, max_dim: int = 1_000_000) -> FockBasis:
    """Enumerate the full N-boson Fock basis for the given lattice.

    Raises CapacityError if the dimension C(N+M-1, N) exceeds max_dim.
    """
    dim = fock_dimension(spec.M, spec.N)
    if dim > max_dim:
        raise CapacityError(
            f"Fock dimension {dim} for M={spec.M}, N={spec.N} exceeds "
            f"the configured maximum {max_dim}")
    states = list(_occupations_desc(spec.N, spec.M))
    return FockBasis(spec, states)


@dataclass
class ManyBodyState:
    """Normalized complex coefficient vector over a Fock basis."""

    basis: FockBasis
    coeffs: np.ndarray = field(repr=False)

    @classmethod
    def from_coefficients(cls, basis: FockBasis, coeffs,
                          normalize: bool = True) -> "ManyBodyState":
        c = np.asarray(coeffs, dtype=np.complex128).copy()
        if c.shape != (basis.dimension,):
            raise ValueError(f"coefficient vector has shape {c.shape}, "
                             f"expected ({basis.dimension},)")
        norm = np.linalg.norm(c)
        if norm == 0.0:
            raise ValueError("coefficient vector has zero norm")
        if normalize:
            c /= norm
        c.setflags(write=False)
        return cls(basis, c)

    @property
    def probabilities(self) -> np.ndarray:
        """|c_u|^2 for every basis state."""
        return np.abs(self.coeffs) ** 2

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))


def fock_state(basis: FockBasis, occ) -> ManyBodyState:
    """The basis vector for a single occupation tuple."""
    c = np.zeros(basis.dimension, dtype=np.complex128)
    c[basis.index_of(occ)] = 1.0
    return ManyBodyState.from_coefficients(basis, c, normalize=False)


def build_hamiltonian(basis: FockBasis, params: HubbardParams) -> np.ndarray:
    """Dense Bose-Hubbard Hamiltonian in the number basis.

    H = -J sum_<i,j> (b_i^dag b_j + h.c.) + (U/2) sum_j n_j (n_j - 1),
    with the bond set fixed by the lattice boundary condition.
    """
    dim = basis.dimension
    occs = basis.occupations
    H = np.zeros((dim, dim), dtype=np.float64)

    n = occs.astype(np.float64)
    H[np.diag_indices(dim)] = 0.5 * params.U * np.sum(n * (n - 1.0), axis=1)

    if params.J != 0.0:
        for i, occ in enumerate(basis.states):
            for (s, t) in basis.spec.bonds:
                for src, dst in ((s, t), (t, s)):
                    if occ[src] == 0:
                        continue
                    hopped = list(occ)
                    hopped[src] -= 1
                    hopped[dst] += 1
                    j = basis.index_of(hopped)
                    H[j, i] -= params.J * math.sqrt(occ[src] * (occ[dst] + 1))
    return H


def ground_state(H: np.ndarray, basis: FockBasis) -> tuple[float, ManyBodyState]:
    """Lowest eigenpair of a real symmetric Hamiltonian.

    The eigenvector's global phase is fixed by making its
    largest-magnitude coefficient real and positive, so repeated runs are
    bit-comparable.  The returned pair satisfies
    ||H v - E v|| <= 1e-10 ||H||.
    """
    if H.shape != (basis.dimension, basis.dimension):
        raise ValueError(f"Hamiltonian shape {H.shape} does not match basis "
                         f"dimension {basis.dimension}")
    try:
        evals, evecs = scipy.linalg.eigh(H)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"symmetric eigensolver failed: {exc}") from exc

    energy = float(evals[0])
    v = evecs[:, 0]

    k = int(np.argmax(np.abs(v)))
    if v[k] < 0:
        v = -v

    h_norm = float(np.max(np.abs(evals)))
    residual = float(np.linalg.norm(H @ v - energy * v))
    if residual > 1e-10 * max(h_norm, 1.0):
        raise EigensolverError(
            f"eigenpair residual {residual:.3e} exceeds tolerance "
            f"{1e-10 * max(h_norm, 1.0):.3e}")

    state = ManyBodyState.from_coefficients(basis, v.astype(np.complex128),
                                            normalize=True)
    return energy, state


def overlap(s1: ManyBodyState, s2: ManyBodyState) -> complex:
    """Inner product <s1|s2> = sum_u conj(c1_u) c2_u."""
    if s1.basis != s2.basis:
        raise ValueError("states are expanded over different bases")
    return complex(np.vdot(s1.coeffs, s2.coeffs))
