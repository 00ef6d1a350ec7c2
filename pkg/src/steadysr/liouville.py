"""Exact master-equation solver for small atom numbers.

Builds the sparse superoperator generating

    drho/dt = -(gamma_c/2) (J+J- rho + rho J+J- - 2 J- rho J+)
              -(w/2) sum_j (s-_j s+_j rho + rho s-_j s+_j - 2 s+_j rho s-_j)

over vectorized density matrices (row-major flattening, so vec(A rho B) =
(A kron B^T) vec(rho)), extracts the steady state from its null space, and
propagates deformed states for two-time correlations via the quantum
regression theorem. This module is the ground-truth oracle the stochastic
and cumulant solvers are tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from . import hilbert
from .errors import (CapabilityError, DegenerateSteadyStateError,
                     NumericalError, ValidationError)
from .model import ModelParams, validate

ORACLE_CAP = 5

# Hermiticity / trace / positivity tolerances for reported density matrices.
HERM_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_FLOOR = -1e-8


@dataclass(frozen=True)
class Liouvillian:
    """Sparse superoperator of dimension 4^N with its parameter snapshot."""

    params: ModelParams
    matrix: sp.csc_array

    @property
    def dim(self) -> int:
        return self.params.dim

    def norm(self) -> float:
        """Frobenius norm, used to scale residual tolerances."""
        return float(np.sqrt((np.abs(self.matrix.data) ** 2).sum()))


def _dissipator_super(op: sp.csr_array) -> sp.csc_array:
    """Vectorized D[L]: L (x) conj(L) - (1/2)[L^+L (x) I + I (x) (L^+L)^T]."""
    d = op.shape[0]
    eye = sp.identity(d, format="csr", dtype=complex)
    ldl = sp.csr_array(op.conj().T @ op)
    out = sp.kron(op, op.conj()) \
        - 0.5 * (sp.kron(ldl, eye) + sp.kron(eye, ldl.T))
    return sp.csc_array(out)


def build_liouvillian(params: ModelParams, cap: int = ORACLE_CAP) -> Liouvillian:
    """Assemble the master-equation generator as a sparse 4^N matrix."""
    validate(params)
    if params.N > cap:
        raise CapabilityError(
            f"exact solver builds a {4**params.N}-dimensional superoperator; "
            f"N={params.N} exceeds the cap of {cap}")
    N = params.N
    Jm = hilbert.build_collective("J_minus", N)
    total = params.gamma_c * _dissipator_super(Jm)
    for j in range(N):
        total = total + params.w * _dissipator_super(
            hilbert.build_single_atom("sigma_plus", j, N))
    return Liouvillian(params=params, matrix=sp.csc_array(total))


def apply(liou: Liouvillian, rho: np.ndarray) -> np.ndarray:
    """Action of the generator on a density matrix, returned as a matrix."""
    d = liou.dim
    return (liou.matrix @ rho.reshape(-1)).reshape(d, d)


def _null_vector(liou: Liouvillian) -> tuple[np.ndarray, float]:
    """Right null vector and the magnitude of the next-smallest eigenvalue."""
    mat = liou.matrix
    n = mat.shape[0]
    if liou.params.N <= 3:
        dense = mat.toarray()
        _, svals, vh = np.linalg.svd(dense)
        gap = svals[-2]
        return vh[-1].conj(), float(gap)
    # Shifted inverse iteration (Arnoldi) around a point just off the
    # eigenvalue at zero; the spectral gap of the dissipative generator is
    # O(gamma_c), far above the shift.
    scale = liou.params.gamma_c + liou.params.w
    sigma = 1e-6 * scale
    vals, vecs = spla.eigs(mat, k=2, sigma=sigma, which="LM")
    order = np.argsort(np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    if abs(vals[0]) > 1e-8 * scale:
        raise NumericalError(
            f"no eigenvalue near zero (closest {vals[0]!r}); n={n}")
    return vecs[:, 0], float(abs(vals[1]))


def steady_state_dm(liou: Liouvillian) -> np.ndarray:
    """Unique steady-state density matrix for w > 0.

    The null vector is reshaped, Hermitized, positivity-clipped (eigenvalues
    in [-1e-8, 0) are set to zero) and trace-normalized. Raises
    DegenerateSteadyStateError when the steady state is not unique, and
    NumericalError when the residual exceeds 1e-9 * ||L||_F.
    """
    params = liou.params
    if params.w == 0.0:
        raise DegenerateSteadyStateError(
            "w = 0: any mixture of collective dark states is stationary")
    vec, gap = _null_vector(liou)
    scale = params.gamma_c + params.w
    if gap < 1e-10 * scale:
        raise DegenerateSteadyStateError(
            f"null space dimension > 1 (second eigenvalue {gap:.2e})")
    d = liou.dim
    rho = vec.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise NumericalError("null vector has (numerically) zero trace")
    rho = rho / tr
    evals, evecs = np.linalg.eigh(rho)
    if evals.min() < EIG_FLOOR:
        raise NumericalError(
            f"steady state has eigenvalue {evals.min():.3e} below {EIG_FLOOR}")
    clipped = np.clip(evals, 0.0, None)
    rho = (evecs * clipped) @ evecs.conj().T
    rho = rho / np.trace(rho).real
    residual = np.linalg.norm(liou.matrix @ rho.reshape(-1))
    if residual > 1e-9 * liou.norm():
        raise NumericalError(
            f"steady-state residual {residual:.3e} exceeds 1e-9 * ||L||")
    return rho


def expect(op, rho: np.ndarray) -> float:
    """<O> = Tr[O rho] for a Hermitian operator (real part returned)."""
    val = (sp.csr_array(op) @ rho).trace() if sp.issparse(op) else np.trace(op @ rho)
    return complex(val).real


def propagate(liou: Liouvillian, mat0: np.ndarray, t_grid) -> np.ndarray:
    """exp(L t) applied to a (not necessarily Hermitian) matrix by adaptive
    time stepping; returns an array of shape (len(t_grid), d, d)."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValidationError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValidationError("t_grid must be strictly increasing and start >= 0")
    d = liou.dim
    mat = liou.matrix

    def rhs(_t, y):
        return mat @ y

    sol = solve_ivp(rhs, (0.0, float(t_grid[-1])), mat0.reshape(-1).astype(complex),
                    method="DOP853", t_eval=t_grid, rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise NumericalError(f"Liouvillian propagation failed: {sol.message}")
    return sol.y.T.reshape(len(t_grid), d, d)


def regression_correlation(liou: Liouvillian, rho_ss: np.ndarray,
                           tau_grid) -> np.ndarray:
    """Two-time dipole correlation <s+_1(tau) s-_2(0)> in steady state.

    By the quantum regression theorem this equals
    Tr[s+_1 exp(L tau) (s-_2 rho_ss)] where atoms 1 and 2 are distinct.
    """
    params = liou.params
    if params.N < 2:
        raise ValidationError("two-atom correlation requires N >= 2")
    tau_grid = np.asarray(tau_grid, dtype=float)
    if tau_grid.size == 0 or tau_grid[0] != 0.0:
        raise ValidationError("tau_grid must start at 0")
    sm2 = hilbert.build_single_atom("sigma_minus", 1, params.N)
    sp1 = hilbert.build_single_atom("sigma_plus", 0, params.N)
    deformed = sm2 @ rho_ss
    if tau_grid.size == 1:
        states = deformed[None, :, :]
    else:
        states = propagate(liou, deformed, tau_grid[1:])
        states = np.concatenate([deformed[None, :, :], states], axis=0)
    return np.array([np.trace(sp1 @ states[k]) for k in range(len(tau_grid))])


def check_density_matrix(rho: np.ndarray) -> None:
    """Assert the Hermiticity / unit-trace / positivity contract."""
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERM_TOL:
        raise NumericalError(f"density matrix not Hermitian ({herm:.2e})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise NumericalError(f"density matrix trace {tr!r} is not 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < EIG_FLOOR:
        raise NumericalError(f"density matrix eigenvalue {lo:.3e} < {EIG_FLOOR}")


def steady_state_observables(params: ModelParams,
                             rho: np.ndarray | None = None) -> dict[str, float]:
    """Standard steady-state expectation values from the exact solver.

    Returns I (emission rate gamma_c <J+J->), Ne (= N/2 + <Jz>), the bare
    moments, and the pair cumulants used by the mean-field comparison.
    """
    N = params.N
    if rho is None:
        rho = steady_state_dm(build_liouvillian(params))
    jpjm = expect(hilbert.build_collective("JpJm", N), rho)
    jz = expect(hilbert.build_collective("J_z", N), rho)
    sz0 = expect(hilbert.build_single_atom("sigma_z", 0, N), rho)
    out = {
        "JpJm": jpjm,
        "Jz": jz,
        "sz0": sz0,
        "I": params.gamma_c * jpjm,
        "Ne": N / 2.0 + jz,
    }
    if N >= 2:
        spsm = hilbert.build_single_atom("sigma_plus", 0, N) \
            @ hilbert.build_single_atom("sigma_minus", 1, N)
        szsz = hilbert.build_single_atom("sigma_z", 0, N) \
            @ hilbert.build_single_atom("sigma_z", 1, N)
        out["spm_pair"] = expect(spsm, rho)
        out["szsz_pair"] = expect(szsz, rho)
    return out


def oracle_fixture(params: ModelParams) -> dict:
    """JSON-ready regression record: observables, P_{M,J} table, residual."""
    liou = build_liouvillian(params)
    rho = steady_state_dm(liou)
    residual = float(np.linalg.norm(liou.matrix @ rho.reshape(-1)))
    table = []
    for sub in hilbert.jm_decomposition(params.N):
        table.append({"J": sub.J, "M": sub.M,
                      "P": expect(hilbert.projector(sub), rho)})
    return {
        "params": {"N": params.N, "gamma_c": params.gamma_c, "w": params.w},
        "observables": steady_state_observables(params, rho),
        "subspace_populations": table,
        "residual": residual,
    }
