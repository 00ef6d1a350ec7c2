"""Product-basis operators and the collective (J, M) decomposition.

Basis convention (fixed for reproducible serialization): the 2^N product
basis is indexed by an integer b whose bit j holds the state of atom j,
with bit value 1 = excited |e> and 0 = ground |g>. Atom 0 is the least
significant bit. State vectors are complex arrays of length 2^N over this
basis; normalized states have unit norm within 1e-10.

Collective operators: J_- = sum_j sigma_-^(j), J_z = (1/2) sum_j sigma_z^(j),
J^2 = (1/2)(J_+ J_- + J_- J_+) + J_z^2. The Hilbert space decomposes into
orthogonal (J, M) eigenspaces of (J^2, J_z); each carries a multiplicity
d(J) = C(N, N/2-J) - C(N, N/2-J-1) independent of M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import CapabilityError, NumericalError, ValidationError

# Dense eigen-decomposition of the largest J_z sector bounds this; the
# trajectory solver itself can go further (see mcwf).
DECOMPOSITION_CAP = 14

SINGLE_ATOM_KINDS = ("sigma_minus", "sigma_plus", "sigma_z")
COLLECTIVE_KINDS = ("J_minus", "J_plus", "J_z", "J_squared", "JpJm")


def dim(N: int) -> int:
    return 2**N


def basis_state(N: int, excited_atoms) -> np.ndarray:
    """Product basis vector with the listed atoms excited, the rest ground."""
    b = 0
    for j in excited_atoms:
        if not 0 <= j < N:
            raise IndexError(f"atom index {j} out of range for N={N}")
        b |= 1 << j
    psi = np.zeros(dim(N), dtype=complex)
    psi[b] = 1.0
    return psi


def ground_state(N: int) -> np.ndarray:
    return basis_state(N, ())


def all_excited_state(N: int) -> np.ndarray:
    return basis_state(N, range(N))


def excitation_numbers(N: int) -> np.ndarray:
    """Number of excited atoms for each basis index (popcount)."""
    b = np.arange(dim(N), dtype=np.uint64)
    counts = np.zeros(dim(N), dtype=np.int64)
    for j in range(N):
        counts += ((b >> np.uint64(j)) & np.uint64(1)).astype(np.int64)
    return counts


def build_single_atom(kind: str, j: int, N: int) -> sp.csr_array:
    """Pauli ladder or sigma_z operator on atom j, identity elsewhere."""
    if kind not in SINGLE_ATOM_KINDS:
        raise ValidationError(f"unknown single-atom operator kind {kind!r}")
    if not 0 <= j < N:
        raise IndexError(f"atom index {j} out of range for N={N}")
    d = dim(N)
    b = np.arange(d)
    if kind == "sigma_z":
        diag = np.where((b >> j) & 1 == 1, 1.0, -1.0)
        return sp.csr_array(sp.diags_array(diag.astype(complex)))
    excited = (b >> j) & 1 == 1
    src = b[excited]           # columns with atom j excited
    tgt = src ^ (1 << j)       # lowering clears bit j
    data = np.ones(src.size, dtype=complex)
    lower = sp.csr_array((data, (tgt, src)), shape=(d, d))
    if kind == "sigma_minus":
        return lower
    return sp.csr_array(lower.T)


def build_collective(kind: str, N: int) -> sp.csr_array:
    """Collective spin operator over all N atoms."""
    if N < 1:
        raise ValidationError(f"N must be >= 1, got {N}")
    if kind not in COLLECTIVE_KINDS:
        raise ValidationError(f"unknown collective operator kind {kind!r}")
    d = dim(N)
    if kind == "J_minus":
        out = sp.csr_array((d, d), dtype=complex)
        for j in range(N):
            out = out + build_single_atom("sigma_minus", j, N)
        return out
    if kind == "J_plus":
        return sp.csr_array(build_collective("J_minus", N).T)
    if kind == "J_z":
        mvals = excitation_numbers(N) - N / 2.0
        return sp.csr_array(sp.diags_array(mvals.astype(complex)))
    if kind == "JpJm":
        Jm = build_collective("J_minus", N)
        return sp.csr_array(Jm.T @ Jm)
    # J_squared = (1/2)(J+J- + J-J+) + Jz^2
    Jm = build_collective("J_minus", N)
    Jp = sp.csr_array(Jm.T)
    Jz = build_collective("J_z", N)
    return sp.csr_array(0.5 * (Jp @ Jm + Jm @ Jp) + Jz @ Jz)


def multiplicity(N: int, J: float) -> int:
    """Count of degenerate (J, M) copies: C(N, N/2-J) - C(N, N/2-J-1)."""
    k = N / 2.0 - J
    if k < 0 or abs(k - round(k)) > 1e-9:
        return 0
    k = round(k)

    def comb(n, r):
        return math.comb(n, r) if 0 <= r <= n else 0

    return comb(N, k) - comb(N, k - 1)


def allowed_J(N: int) -> list[float]:
    """J values with nonzero multiplicity, descending from N/2."""
    out = []
    J = N / 2.0
    while J >= -1e-9:
        if multiplicity(N, J) > 0:
            out.append(J)
        J -= 1.0
    return out


@dataclass(frozen=True)
class JMSubspace:
    """One (J, M) eigenspace of (J^2, J_z) with its degenerate basis.

    basis holds d orthonormal columns of length 2^N, each a simultaneous
    eigenvector of J^2 (eigenvalue J(J+1)) and J_z (eigenvalue M). The
    degeneracy label is the column index; columns are ladder-consistent
    across M within one J (J_- maps column k of (J, M) onto column k of
    (J, M-1) up to the ladder coefficient).
    """

    J: float
    M: float
    multiplicity: int
    basis: sp.csc_array

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]


def _sector_indices(N: int) -> list[np.ndarray]:
    counts = excitation_numbers(N)
    return [np.flatnonzero(counts == k) for k in range(N + 1)]


def _snap_J(eigenvalue: float, N: int, M: float) -> float:
    """Map a J^2 eigenvalue to the nearest admissible J; tolerance 1e-6."""
    raw = 0.5 * (-1.0 + math.sqrt(max(1.0 + 4.0 * eigenvalue, 0.0)))
    J = round(2.0 * raw) / 2.0
    J = max(J, abs(M))
    if abs(J * (J + 1.0) - eigenvalue) > 1e-6:
        raise NumericalError(
            f"J^2 eigenvalue {eigenvalue!r} does not snap to any J(J+1) "
            f"(nearest J={J}, N={N}, M={M})")
    return J


@lru_cache(maxsize=4)
def jm_decomposition(N: int) -> tuple[JMSubspace, ...]:
    """Complete orthogonal decomposition of the 2^N space into (J, M) blocks.

    Sectors of fixed J_z (excitation count) are processed from M = N/2
    downward. Within a sector, states belonging to J > M ladders are
    obtained by applying J_- to the (J, M+1) basis, which keeps the
    degeneracy labels aligned along each ladder; the new J = M ladder tops
    are read off the sector-restricted eigen-decomposition of J^2 with
    eigenvalues snapped to J(J+1).
    """
    if N < 1:
        raise ValidationError(f"N must be >= 1, got {N}")
    if N > DECOMPOSITION_CAP:
        raise CapabilityError(
            f"(J, M) decomposition needs a dense sector eigensolve; "
            f"N={N} exceeds the cap of {DECOMPOSITION_CAP}")
    d = dim(N)
    sectors = _sector_indices(N)
    J2 = build_collective("J_squared", N).tocsr()
    Jm = build_collective("J_minus", N).tocsr()

    # blocks[J] = sparse (2^N, d_J) basis at the current M, descended in place
    blocks: dict[float, sp.csc_array] = {}
    subspaces: list[JMSubspace] = []
    for k in range(N, -1, -1):
        M = k - N / 2.0
        idx = sectors[k]
        # Descend each surviving ladder by one M step; ladders end at M = -J.
        descended: dict[float, sp.csc_array] = {}
        for J in sorted(blocks, reverse=True):
            if J + M < -1e-9:
                continue
            coeff = math.sqrt((J + M + 1.0) * (J - M))
            descended[J] = sp.csc_array((Jm @ blocks[J]) * (1.0 / coeff))
        blocks = descended
        # A new ladder with J = M opens in this sector when multiplicity > 0.
        d_new = multiplicity(N, M)
        if d_new > 0:
            sector_J2 = J2[idx, :][:, idx].toarray()
            evals, evecs = np.linalg.eigh(sector_J2)
            snapped = np.array([_snap_J(ev, N, M) for ev in evals])
            cols = np.flatnonzero(np.abs(snapped - M) < 1e-9)
            if cols.size != d_new:
                raise NumericalError(
                    f"sector M={M}: found {cols.size} J={M} eigenvectors, "
                    f"expected {d_new}")
            top = evecs[:, cols].astype(complex)
            rows = np.repeat(idx, d_new)
            colidx = np.tile(np.arange(d_new), idx.size)
            blocks[M] = sp.csc_array((top.ravel(), (rows, colidx)),
                                     shape=(d, d_new))
        for J in sorted(blocks, reverse=True):
            basis = blocks[J].copy()
            basis.eliminate_zeros()
            subspaces.append(JMSubspace(J=J, M=M, multiplicity=basis.shape[1],
                                        basis=basis))
    total = sum(s.multiplicity for s in subspaces)
    if total != d:
        raise NumericalError(f"decomposition dimensions sum to {total}, expected {d}")
    return tuple(subspaces)


def projector(sub: JMSubspace) -> sp.csr_array:
    """Hermitian idempotent onto the subspace, rank = multiplicity."""
    B = sub.basis
    return sp.csr_array(B @ B.conj().T)


def dump_operator(op, stream) -> None:
    """Write a sparse operator as 'row col re im' coordinate lines."""
    coo = sp.coo_array(op)
    for r, c, v in zip(coo.row, coo.col, coo.data):
        stream.write(f"{r} {c} {v.real!r} {v.imag!r}\n")
