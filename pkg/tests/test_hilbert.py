import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steadysr import hilbert as hb
from steadysr.errors import CapabilityError


def random_state(N, seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=2**N) + 1j * rng.normal(size=2**N)
    return psi / np.linalg.norm(psi)


def test_sigma_minus_single_atom():
    op = hb.build_single_atom("sigma_minus", 0, 1).toarray()
    e = hb.basis_state(1, [0])
    g = hb.ground_state(1)
    assert np.allclose(op @ e, g)
    assert np.allclose(op @ g, 0)


def test_sigma_z_acts_on_named_atom():
    # |g e>: atom 0 ground, atom 1 excited
    psi = hb.basis_state(2, [1])
    sz0 = hb.build_single_atom("sigma_z", 0, 2)
    assert np.allclose(sz0 @ psi, -psi)
    sz1 = hb.build_single_atom("sigma_z", 1, 2)
    assert np.allclose(sz1 @ psi, psi)


def test_sigma_plus_annihilates_excited():
    ee = hb.basis_state(2, [0, 1])
    sp1 = hb.build_single_atom("sigma_plus", 1, 2)
    assert np.allclose(sp1 @ ee, 0)


def test_atom_index_out_of_range():
    with pytest.raises(IndexError):
        hb.build_single_atom("sigma_minus", 2, 2)


def test_collective_lowering_two_atoms():
    Jm = hb.build_collective("J_minus", 2)
    ee = hb.basis_state(2, [0, 1])
    out = Jm @ ee
    expected = hb.basis_state(2, [1]) + hb.basis_state(2, [0])
    assert np.allclose(out, expected)
    assert np.vdot(out, out).real == pytest.approx(2.0)
    JpJm = hb.build_collective("JpJm", 2)
    assert np.vdot(ee, JpJm @ ee).real == pytest.approx(2.0)


def test_adjoint_pairings():
    for N in (2, 3):
        sm = hb.build_single_atom("sigma_minus", 0, N)
        sp = hb.build_single_atom("sigma_plus", 0, N)
        assert (sm.conj().T - sp).nnz == 0
        Jm = hb.build_collective("J_minus", N)
        Jp = hb.build_collective("J_plus", N)
        assert (Jm.conj().T - Jp).nnz == 0


def test_trace_of_J_squared_matches_multiplicities():
    # brute-force trace against sum over (J, M) of d(J) * J(J+1)
    tr = float(hb.build_collective("J_squared", 4).diagonal().sum().real)
    by_formula = sum(hb.multiplicity(4, J) * (2 * J + 1) * J * (J + 1)
                     for J in hb.allowed_J(4))
    assert tr == pytest.approx(48.0, abs=1e-10)
    assert by_formula == pytest.approx(48.0)


def test_distinct_atom_operators_commute_exactly():
    for kind_a in ("sigma_minus", "sigma_plus", "sigma_z"):
        for kind_b in ("sigma_minus", "sigma_plus", "sigma_z"):
            a = hb.build_single_atom(kind_a, 0, 3)
            b = hb.build_single_atom(kind_b, 2, 3)
            comm = a @ b - b @ a
            assert comm.nnz == 0


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=40)
def test_operator_identity_on_random_states(N, seed):
    psi = random_state(N, seed)
    JpJm = hb.build_collective("JpJm", N)
    J2 = hb.build_collective("J_squared", N)
    Jz = hb.build_collective("J_z", N)
    lhs = np.vdot(psi, JpJm @ psi)
    rhs = np.vdot(psi, J2 @ psi) - np.vdot(psi, Jz @ (Jz @ psi)) \
        + np.vdot(psi, Jz @ psi)
    assert abs(lhs - rhs) < 1e-8


def test_multiplicity_closed_form():
    assert hb.multiplicity(2, 1.0) == 1
    assert hb.multiplicity(2, 0.0) == 1
    assert hb.multiplicity(4, 2.0) == 1
    assert hb.multiplicity(4, 1.0) == 3
    assert hb.multiplicity(4, 0.0) == 2
    assert hb.multiplicity(1, 0.5) == 1
    assert hb.multiplicity(4, 0.5) == 0      # wrong parity


def test_decomposition_small_cases():
    subs2 = {(s.J, s.M): s.multiplicity for s in hb.jm_decomposition(2)}
    assert subs2 == {(1.0, 1.0): 1, (1.0, 0.0): 1, (1.0, -1.0): 1,
                     (0.0, 0.0): 1}
    subs4 = hb.jm_decomposition(4)
    dims = {}
    for s in subs4:
        dims[s.J] = dims.get(s.J, 0) + s.multiplicity
    assert dims == {2.0: 5, 1.0: 9, 0.0: 2}
    assert sum(dims.values()) == 16
    subs1 = hb.jm_decomposition(1)
    assert {(s.J, s.M) for s in subs1} == {(0.5, 0.5), (0.5, -0.5)}


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5, 6, 7, 8])
def test_decomposition_eigenproperties(N):
    J2 = hb.build_collective("J_squared", N)
    Jz = hb.build_collective("J_z", N)
    total = 0
    columns = []
    for s in hb.jm_decomposition(N):
        assert s.multiplicity == hb.multiplicity(N, s.J)
        B = s.basis.toarray()
        assert np.max(np.abs(J2 @ B - s.J * (s.J + 1) * B)) < 1e-8
        assert np.max(np.abs(Jz @ B - s.M * B)) < 1e-8
        total += s.multiplicity
        columns.append(B)
    assert total == 2**N
    V = np.hstack(columns)
    gram = V.conj().T @ V
    assert np.max(np.abs(gram - np.eye(2**N))) < 1e-8


def test_multiplicity_independent_of_M():
    for N in (3, 5, 6):
        per_J = {}
        for s in hb.jm_decomposition(N):
            per_J.setdefault(s.J, set()).add(s.multiplicity)
        assert all(len(v) == 1 for v in per_J.values())


def test_decomposition_cap():
    with pytest.raises(CapabilityError):
        hb.jm_decomposition(hb.DECOMPOSITION_CAP + 1)


def test_singlet_projector():
    subs = {(s.J, s.M): s for s in hb.jm_decomposition(2)}
    P = hb.projector(subs[(0.0, 0.0)]).toarray()
    singlet = (hb.basis_state(2, [0]) - hb.basis_state(2, [1])) / np.sqrt(2)
    assert np.allclose(P @ singlet, singlet, atol=1e-12)
    assert np.linalg.matrix_rank(P) == 1
    assert np.allclose(P, P.conj().T)


def test_projector_completeness_and_idempotence():
    subs = hb.jm_decomposition(4)
    total = sum(hb.projector(s).toarray() for s in subs)
    assert np.max(np.abs(total - np.eye(16))) < 1e-10
    for s in subs:
        P = hb.projector(s).toarray()
        assert np.max(np.abs(P @ P - P)) < 1e-10


def test_dump_operator_format():
    buf = io.StringIO()
    hb.dump_operator(hb.build_single_atom("sigma_minus", 0, 1), buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines == ["0 1 1.0 0.0"]
