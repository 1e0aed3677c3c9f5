"""
Master equation of the single effective nucleus.

The ensemble-cavity system is reduced to one ground state |g> and one excited
state |e_t> per hyperfine transition t. Sub-ensemble weights sqrt(p_g) sit in
the coupling matrix V, the cavity enters only through G = V V^dagger:

    H     = sum_t (Delta_t - Delta)|e_t><e_t| - Delta_LS sum G_tt'|e_t><e_t'|
            - Omega sum_t (s_t |e_t><g| + h.c.),       s = V e_in
    L_SE  = gamma * D[|g><e_t|]
    L_SR  = gamma_S * diag(G) cross-damping
    L_SGC = gamma_S * (G - diag(G)) cross-damping

Superoperators act on row-major vec(rho): vec(A rho B) = (A kron B^T) vec(rho).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from src.core import log_handling as lh
from src.core.errors import ConvergenceError, SolverError, StepSizeError, ValidationError

LOG_FILE = lh.log_path("physics.log")
LOG_TZ = "UTC"
LOGGER = lh.LogHandling(LOG_FILE, LOG_TZ)

POLARIZATIONS = ("sigma", "pi")
WEAK_DRIVE_LIMIT = 0.01
MAX_CONDITION = 1e13


@dataclass(frozen=True, eq=False)
class CavityParams:
    gamma_s: float = 27.0
    delta_ls: float = 1.0
    r_c: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=complex))
    amplitude_scale: float = None
    coupled_polarizations: tuple = POLARIZATIONS

    def __post_init__(self):
        r_c = np.asarray(self.r_c, dtype=complex)
        if r_c.ndim == 0:
            r_c = r_c * np.eye(2, dtype=complex)
        if r_c.shape != (2, 2):
            raise ValidationError(f"r_c must be a scalar or a 2x2 matrix, got shape {r_c.shape}")
        object.__setattr__(self, "r_c", r_c)
        if self.gamma_s < 0:
            raise ValidationError(f"gamma_s must be >= 0, got {self.gamma_s}")
        if self.amplitude_scale is None:
            # critical coupling; gamma/2 keeps A > 0 for a cavity without superradiance
            object.__setattr__(self, "amplitude_scale", self.gamma_s / 2.0 if self.gamma_s > 0 else 0.5)
        if self.amplitude_scale <= 0:
            raise ValidationError(f"amplitude_scale must be > 0, got {self.amplitude_scale}")
        coupled = tuple(p for p in POLARIZATIONS if p in set(self.coupled_polarizations))
        if not coupled or len(coupled) != len(set(self.coupled_polarizations)):
            raise ValidationError(f"coupled_polarizations must be a non-empty subset of {POLARIZATIONS}, "
                                  f"got {self.coupled_polarizations!r}")
        object.__setattr__(self, "coupled_polarizations", coupled)

    def polarization_mask(self):
        return np.array([1.0 if p in self.coupled_polarizations else 0.0 for p in POLARIZATIONS])


@dataclass(frozen=True, eq=False)
class DriveConfig:
    rabi: float = 1e-3
    polarization: np.ndarray = field(default_factory=lambda: np.array([1.0 + 0j, 0.0 + 0j]))

    def __post_init__(self):
        pol = np.asarray(self.polarization, dtype=complex)
        object.__setattr__(self, "polarization", pol)
        if self.rabi <= 0:
            raise ValidationError(f"drive rabi must be > 0, got {self.rabi}")
        if pol.shape != (2,) or abs(np.linalg.norm(pol) - 1.0) > 1e-12:
            raise ValidationError("drive polarization must be a unit (sigma, pi) 2-vector")
        if self.rabi > WEAK_DRIVE_LIMIT:
            LOGGER.writeLog(f"liouvillian: rabi={self.rabi} exceeds {WEAK_DRIVE_LIMIT} gamma, "
                            f"linear response may be inaccurate")
            warnings.warn(f"rabi={self.rabi} gamma is outside the weak-drive regime", RuntimeWarning)


@dataclass(frozen=True)
class Toggles:
    sgc_dissipative: bool = True
    sgc_hamiltonian: bool = True
    sr: bool = True

    @classmethod
    def sgc_off(cls):
        return cls(sgc_dissipative=False, sgc_hamiltonian=False, sr=True)

    @classmethod
    def all_off(cls):
        return cls(sgc_dissipative=False, sgc_hamiltonian=False, sr=False)


@dataclass(frozen=True, eq=False)
class GMatrix:
    entries: np.ndarray

    def is_hermitian(self, tol=1e-12):
        return bool(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0) <= tol)

    def min_eigenvalue(self):
        return float(np.min(np.linalg.eigvalsh(self.entries)))

    def rank(self, tol=1e-10):
        return int(np.sum(np.linalg.eigvalsh(self.entries) > tol))


@dataclass(frozen=True, eq=False)
class CoherenceVector:
    rho: np.ndarray
    rabi: float
    delta: float
    in_polarization: np.ndarray


def g_matrix_from_couplings(couplings, cavity):
    """G_tt' = sum over coupled p of V_tp conj(V_t'p)"""
    masked = np.asarray(couplings, dtype=complex) * cavity.polarization_mask()[None, :]
    return GMatrix(entries=masked @ masked.conj().T)


def g_matrix(scheme, cavity):
    return g_matrix_from_couplings(scheme.coupling_matrix(), cavity)


def collective_matrices(g, toggles):
    """(G used in the rate matrix, G used in the Lamb-shift matrix) after applying the toggles"""
    entries = g.entries if isinstance(g, GMatrix) else np.asarray(g)
    diagonal = np.diag(np.diag(entries))
    if not toggles.sr:
        zero = np.zeros_like(entries)
        return zero, zero
    g_diss = entries if toggles.sgc_dissipative else diagonal
    g_ham = entries if toggles.sgc_hamiltonian else diagonal
    return g_diss, g_ham


def effective_matrix(detunings, g, cavity, toggles, delta, gamma=1.0):
    """M(Delta) = (Delta - Delta_t + i gamma/2) delta_tt' + Delta_LS G_ham + i gamma_S/2 G_diss"""
    detunings = np.asarray(detunings, dtype=float)
    g_diss, g_ham = collective_matrices(g, toggles)
    return (np.diag(delta - detunings + 0.5j * gamma)
            + cavity.delta_ls * g_ham + 0.5j * cavity.gamma_s * g_diss)


def rate_matrix(g, cavity, toggles, gamma=1.0):
    """Total dissipative rate matrix gamma*I + gamma_S*G_diss (PSD for a physical cavity)"""
    g_diss, _ = collective_matrices(g, toggles)
    return gamma * np.eye(g_diss.shape[0]) + cavity.gamma_s * g_diss


def lamb_matrix(g, cavity, toggles):
    _, g_ham = collective_matrices(g, toggles)
    return cavity.delta_ls * g_ham


def impulse_response(detunings, couplings, cavity, times, toggles=Toggles(), gamma=1.0):
    """
    Exact causal field response E(t) = A V^dagger exp(iBt) V with B = M(0), one
    2x2 (out, in) matrix per time; zero for t < 0. The Fourier partner of r - r_c.
    """
    times = np.asarray(times, dtype=float)
    couplings = np.asarray(couplings, dtype=complex) * cavity.polarization_mask()[None, :]
    g = g_matrix_from_couplings(couplings, cavity)
    b = effective_matrix(detunings, g, cavity, toggles, 0.0, gamma)
    fields = np.zeros((times.size, 2, 2), dtype=complex)
    for i, t in enumerate(times):
        if t < 0:
            continue
        fields[i] = cavity.amplitude_scale * couplings.conj().T @ expm(1j * b * t) @ couplings
        if t == 0:
            fields[i] *= 0.5
    return fields


def decay_eigenvalues(detunings, g, cavity, toggles, gamma=1.0):
    """
    Collective line positions and widths: eigenvalues lambda of B = M(0), a pole
    at Delta = -Re(lambda) with full width 2 Im(lambda). Sorted by position.
    """
    eigenvalues = np.linalg.eigvals(effective_matrix(detunings, g, cavity, toggles, 0.0, gamma))
    positions = -eigenvalues.real
    widths = 2.0 * eigenvalues.imag
    order = np.argsort(positions)
    return positions[order], widths[order]


def solve_linear(matrix, rhs, context=""):
    """Dense solve with partial pivoting; raises SolverError on singular or ill-conditioned systems"""
    condition = np.linalg.cond(matrix)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        LOGGER.writeLog(f"liouvillian: ill-conditioned system {context} cond={condition:.3e}")
        raise SolverError(f"singular linear system {context}".strip(), condition_number=condition)
    try:
        return np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError as e:
        raise SolverError(f"linear solve failed {context}: {e}", condition_number=condition)


def linear_response_from_couplings(detunings, couplings, cavity, in_polarization, delta,
                                   rabi=1e-3, toggles=Toggles(), gamma=1.0):
    in_polarization = np.asarray(in_polarization, dtype=complex)
    if abs(np.linalg.norm(in_polarization) - 1.0) > 1e-12:
        raise ValidationError("in_polarization must have unit norm")
    couplings = np.asarray(couplings, dtype=complex)
    g = g_matrix_from_couplings(couplings, cavity)
    source = (couplings * cavity.polarization_mask()[None, :]) @ in_polarization
    matrix = effective_matrix(detunings, g, cavity, toggles, delta, gamma)
    rho = solve_linear(matrix, -rabi * source, context=f"at delta={delta}")
    return CoherenceVector(rho=rho, rabi=rabi, delta=float(delta), in_polarization=in_polarization)


def linear_response(scheme, cavity, in_polarization, delta, drive=None, toggles=Toggles()):
    """First-order optical coherences rho_t solving M(Delta) rho = -Omega s (the fast path)"""
    rabi = drive.rabi if drive is not None else DriveConfig().rabi
    return linear_response_from_couplings(scheme.detunings(), scheme.coupling_matrix(), cavity,
                                          in_polarization, delta, rabi=rabi, toggles=toggles)


# --- superoperators --------------------------------------------------------------

def _commutator_superop(hamiltonian):
    identity = np.eye(hamiltonian.shape[0])
    return -1j * (np.kron(hamiltonian, identity) - np.kron(identity, hamiltonian.T))


def _dissipator_superop(rates, jumps):
    """sum_jk R_jk (L_k rho L_j^dag - 1/2 {L_j^dag L_k, rho})"""
    dim = jumps[0].shape[0]
    identity = np.eye(dim)
    superop = np.zeros((dim * dim, dim * dim), dtype=complex)
    for j, l_j in enumerate(jumps):
        for k, l_k in enumerate(jumps):
            rate = rates[j, k]
            if rate == 0:
                continue
            product = l_j.conj().T @ l_k
            superop += rate * (np.kron(l_k, l_j.conj())
                               - 0.5 * np.kron(product, identity)
                               - 0.5 * np.kron(identity, product.T))
    return superop


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """
    Generator on the 7-level effective nucleus, kept as separate parts.

    parts['hamiltonian'] includes the drive; parts['drive'] repeats the drive
    commutator alone so the perturbative solver can split it off.
    """
    dimension: int
    n_levels: int
    parts: dict
    toggles: Toggles
    rabi: float
    delta: float

    def generator(self):
        return sum(self.parts[name] for name in ("hamiltonian", "se", "sr", "sgc"))

    def undriven(self):
        return self.generator() - self.parts["drive"]

    def apply(self, rho):
        rho = np.asarray(rho, dtype=complex)
        return (self.generator() @ rho.reshape(-1)).reshape(rho.shape)

    def ground_state(self):
        rho = np.zeros((self.n_levels, self.n_levels), dtype=complex)
        rho[0, 0] = 1.0
        return rho


def assemble_from_couplings(detunings, couplings, cavity, drive, toggles=Toggles(), delta=0.0, gamma=1.0):
    detunings = np.asarray(detunings, dtype=float)
    couplings = np.asarray(couplings, dtype=complex)
    n_transitions = len(detunings)
    if couplings.shape != (n_transitions, 2):
        raise ValidationError(f"coupling matrix shape {couplings.shape} does not match "
                              f"{n_transitions} transitions")
    n_levels = n_transitions + 1

    g = g_matrix_from_couplings(couplings, cavity)
    g_diss, g_ham = collective_matrices(g, toggles)

    jumps = []
    for t in range(n_transitions):
        jump = np.zeros((n_levels, n_levels), dtype=complex)
        jump[0, 1 + t] = 1.0
        jumps.append(jump)

    h0 = np.zeros((n_levels, n_levels), dtype=complex)
    h0[1:, 1:] = np.diag(detunings - delta) - cavity.delta_ls * g_ham
    source = (couplings * cavity.polarization_mask()[None, :]) @ drive.polarization
    h_drive = np.zeros((n_levels, n_levels), dtype=complex)
    h_drive[1:, 0] = -drive.rabi * source
    h_drive[0, 1:] = -drive.rabi * source.conj()

    drive_part = _commutator_superop(h_drive)
    sr_rates = cavity.gamma_s * np.diag(np.diag(g_diss))
    sgc_rates = cavity.gamma_s * (g_diss - np.diag(np.diag(g_diss)))
    parts = {
        "hamiltonian": _commutator_superop(h0) + drive_part,
        "drive": drive_part,
        "se": _dissipator_superop(gamma * np.eye(n_transitions), jumps),
        "sr": _dissipator_superop(sr_rates, jumps),
        "sgc": _dissipator_superop(sgc_rates, jumps),
    }
    LOGGER.writeDebugLog(f"liouvillian: assembled {n_levels}-level generator at delta={delta} toggles={toggles}")
    return Liouvillian(dimension=n_levels * n_levels, n_levels=n_levels, parts=parts,
                       toggles=toggles, rabi=drive.rabi, delta=float(delta))


def assemble_liouvillian(scheme, cavity, drive, toggles=Toggles(), delta=0.0):
    return assemble_from_couplings(scheme.detunings(), scheme.coupling_matrix(), cavity, drive,
                                   toggles=toggles, delta=delta)


def optical_coherences(rho):
    """<e_t|rho|g> for every transition"""
    return np.asarray(rho)[1:, 0].copy()


def steady_state(liouvillian, initial_ground_populations=(0.5, 0.5), order=2, tol=1e-9):
    """
    Perturbative stationary state: rho0 = |g><g|, first-order coherences from
    L0 rho1 = -L_drive rho0 and (order=2) second-order populations from
    L0 rho2 = -L_drive rho1 with tr rho2 = 0.
    """
    populations = np.asarray(initial_ground_populations, dtype=float)
    if np.any(populations < 0) or abs(populations.sum() - 1.0) > 1e-12:
        raise ValidationError("initial ground populations must be non-negative and sum to 1")
    if liouvillian.rabi > WEAK_DRIVE_LIMIT:
        LOGGER.writeLog(f"liouvillian: steady_state with rabi={liouvillian.rabi}, outside the weak-drive regime")

    n = liouvillian.n_levels
    l0 = liouvillian.undriven()
    l_drive = liouvillian.parts["drive"]
    rho0 = liouvillian.ground_state().reshape(-1)

    coherence_idx = np.array([t * n for t in range(1, n)] + list(range(1, n)))
    rhs1 = -(l_drive @ rho0)
    block = l0[np.ix_(coherence_idx, coherence_idx)]
    rho1 = np.zeros(n * n, dtype=complex)
    rho1[coherence_idx] = solve_linear(block, rhs1[coherence_idx], context="(first-order coherences)")
    residual = np.linalg.norm(l0 @ rho1 - rhs1)
    if residual > tol * max(1.0, np.linalg.norm(rhs1)):
        raise ConvergenceError("first-order stationarity not met", residual=residual)

    rho = rho0 + rho1
    if order >= 2:
        population_idx = np.array([0] + [i * n + j for i in range(1, n) for j in range(1, n)])
        rhs2 = -(l_drive @ rho1)
        block2 = l0[np.ix_(population_idx, population_idx)]
        trace_row = np.array([1.0] + [1.0 if i == j else 0.0 for i in range(1, n) for j in range(1, n)])
        system = np.vstack([block2, trace_row[None, :]])
        target = np.concatenate([rhs2[population_idx], [0.0]])
        solution, *_ = np.linalg.lstsq(system, target, rcond=None)
        residual2 = np.linalg.norm(system @ solution - target)
        if residual2 > tol * max(1.0, np.linalg.norm(target)):
            raise ConvergenceError("second-order stationarity not met", residual=residual2)
        rho2 = np.zeros(n * n, dtype=complex)
        rho2[population_idx] = solution
        rho = rho + rho2

    rho = rho.reshape(n, n)
    return 0.5 * (rho + rho.conj().T)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def populations(self):
        return np.real(np.einsum("tii->ti", self.states))

    def traces(self):
        return np.real(np.einsum("tii->t", self.states))


def time_evolve(liouvillian, rho0, t_grid, rtol=1e-10, atol=1e-12):
    """Propagate d rho/dt = L rho with an adaptive 8th-order Runge-Kutta integrator"""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] < 0 or np.any(np.diff(t_grid) < 0):
        raise ValidationError("t_grid must be a non-empty, non-decreasing array of times >= 0")
    rho0 = np.asarray(rho0, dtype=complex)
    generator = liouvillian.generator()
    shape = rho0.shape

    if not np.any(generator):
        return Trajectory(times=t_grid, states=np.repeat(rho0[None, :, :], t_grid.size, axis=0))

    solution = solve_ivp(lambda t, y: generator @ y, (0.0, float(t_grid[-1])), rho0.reshape(-1),
                         method="DOP853", t_eval=t_grid, rtol=rtol, atol=atol)
    if solution.status != 0:
        LOGGER.writeLog(f"liouvillian: time evolution failed: {solution.message}")
        raise StepSizeError(f"time evolution failed: {solution.message}")
    states = solution.y.T.reshape((t_grid.size,) + shape)
    states = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    return Trajectory(times=t_grid, states=states)
