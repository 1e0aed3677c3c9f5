"""
Magnetically split 57Fe level scheme and the coupling of each M1 line to the
two transverse cavity polarizations.

Vectors live in a Cartesian lab frame with k0 = x, pi = y (surface normal) and
sigma = z, so that sigma = k0 x pi holds with the ordinary cross product.
User-facing directions are given as (k0, sigma, pi) components and converted
with frame_vector().
"""

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from sympy import Rational
from sympy.physics.quantum.cg import CG

from src.core import log_handling as lh
from src.core.errors import ValidationError

LOG_FILE = lh.log_path("physics.log")
LOG_TZ = "UTC"
LOGGER = lh.LogHandling(LOG_FILE, LOG_TZ)

UNIT_TOL = 1e-12

K0_HAT = np.array([1.0, 0.0, 0.0])
PI_HAT = np.array([0.0, 1.0, 0.0])
SIGMA_HAT = np.array([0.0, 0.0, 1.0])
FRAME_AXES = {"k0": K0_HAT, "sigma": SIGMA_HAT, "pi": PI_HAT}

# Standard 57Fe literature values; every entry can be overridden from the run config.
FE57_CONSTANTS = {
    "name": "Fe57",
    "ground_spin": 0.5,
    "excited_spin": 1.5,
    "g_ground": 0.1812,
    "g_excited": -0.1033,
    "gamma_ev": 4.66e-9,
    "transition_energy_kev": 14.4125,
    "multipolarity": "M1",
    "mu_n_ev_per_t": 3.1525e-8,
}

# b_hat of each preset as (k0, sigma, pi) components, normalised on use
GEOMETRY_PRESETS = {
    "faraday": (1.0, 0.0, 0.0),
    "half_faraday": (1.0, 1.0, 0.0),
    "voigt45": (0.0, 1.0, 0.0),
}


def frame_vector(k0, sigma, pi):
    """Lab-frame 3-vector from its (k0, sigma, pi) components"""
    return k0 * K0_HAT + sigma * SIGMA_HAT + pi * PI_HAT


def _require_unit(vector, name):
    norm = np.linalg.norm(vector)
    if not np.isfinite(norm) or abs(norm - 1.0) > UNIT_TOL:
        raise ValidationError(f"{name} must have unit norm, got |{name}| = {norm!r}")


def rotate(vector, axis, angle_deg):
    """Rotate a lab vector about a frame axis ('k0', 'sigma', 'pi') by angle_deg (Rodrigues)"""
    if axis not in FRAME_AXES:
        raise ValidationError(f"misalignment axis must be one of {sorted(FRAME_AXES)}, got {axis!r}")
    u = FRAME_AXES[axis]
    theta = math.radians(angle_deg)
    v = np.asarray(vector, dtype=float)
    return (v * math.cos(theta) + np.cross(u, v) * math.sin(theta)
            + u * (u @ v) * (1.0 - math.cos(theta)))


@dataclass(frozen=True)
class NuclearSpecies:
    name: str
    ground_spin: float
    excited_spin: float
    g_ground: float
    g_excited: float
    gamma_ev: float
    transition_energy_kev: float
    multipolarity: str = "M1"
    mu_n_ev_per_t: float = FE57_CONSTANTS["mu_n_ev_per_t"]

    def __post_init__(self):
        if self.gamma_ev <= 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma_ev}")
        if self.transition_energy_kev <= 0:
            raise ValidationError(f"transition energy must be positive, got {self.transition_energy_kev}")
        for label, spin in (("ground_spin", self.ground_spin), ("excited_spin", self.excited_spin)):
            if spin < 0 or abs(2 * spin - round(2 * spin)) > 1e-12:
                raise ValidationError(f"{label} must be a non-negative half-integer, got {spin}")

    @classmethod
    def fe57(cls, **overrides):
        """The built-in 57Fe species, optionally with overridden constants"""
        values = dict(FE57_CONSTANTS)
        unknown = set(overrides) - set(values)
        if unknown:
            raise ValidationError(f"unknown species constants: {sorted(unknown)}")
        values.update(overrides)
        return cls(**values)

    def g_factor(self, branch):
        return self.g_ground if branch == "ground" else self.g_excited

    def spin(self, branch):
        return self.ground_spin if branch == "ground" else self.excited_spin


@dataclass(frozen=True, eq=False)
class GeometryConfig:
    """
    Magnetization and incident polarization.

    b_hat is the nominal field direction in the lab frame; the misalignment
    (axis, degrees) is applied on top of it by effective_b_hat.
    """
    b_hat: np.ndarray
    b_magnitude: float = 33.3
    in_polarization: np.ndarray = field(default_factory=lambda: np.array([1.0 + 0j, 0.0 + 0j]))
    preset: str = "custom"
    misalignment: tuple = None

    def __post_init__(self):
        b_hat = np.asarray(self.b_hat, dtype=float)
        pol = np.asarray(self.in_polarization, dtype=complex)
        object.__setattr__(self, "b_hat", b_hat)
        object.__setattr__(self, "in_polarization", pol)
        if b_hat.shape != (3,):
            raise ValidationError(f"b_hat must be a 3-vector, got shape {b_hat.shape}")
        if pol.shape != (2,):
            raise ValidationError(f"in_polarization must be a (sigma, pi) 2-vector, got shape {pol.shape}")
        _require_unit(b_hat, "b_hat")
        _require_unit(pol, "in_polarization")
        if self.b_magnitude < 0:
            raise ValidationError(f"field magnitude must be >= 0 (direction lives in b_hat), got {self.b_magnitude}")
        if self.preset not in set(GEOMETRY_PRESETS) | {"custom"}:
            raise ValidationError(f"unknown geometry preset {self.preset!r}")
        if self.misalignment is not None:
            axis, angle = self.misalignment
            if axis not in FRAME_AXES:
                raise ValidationError(f"misalignment axis must be one of {sorted(FRAME_AXES)}, got {axis!r}")
            object.__setattr__(self, "misalignment", (axis, float(angle)))

    @classmethod
    def from_preset(cls, name, b_magnitude=33.3, in_polarization=(1.0, 0.0), misalignment=None):
        if name not in GEOMETRY_PRESETS:
            raise ValidationError(f"unknown geometry preset {name!r}, expected one of {sorted(GEOMETRY_PRESETS)}")
        direction = frame_vector(*GEOMETRY_PRESETS[name])
        return cls(b_hat=direction / np.linalg.norm(direction), b_magnitude=b_magnitude,
                   in_polarization=np.asarray(in_polarization, dtype=complex), preset=name,
                   misalignment=misalignment)

    @classmethod
    def from_components(cls, k0, sigma, pi, **kwargs):
        direction = frame_vector(k0, sigma, pi)
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ValidationError("b_hat components must not all vanish")
        return cls(b_hat=direction / norm, **kwargs)

    @property
    def effective_b_hat(self):
        if self.misalignment is None or self.misalignment[1] == 0.0:
            return self.b_hat
        axis, angle = self.misalignment
        rotated = rotate(self.b_hat, axis, angle)
        return rotated / np.linalg.norm(rotated)


def reverse_field(geometry):
    """The same geometry with the hyperfine field reversed"""
    return replace(geometry, b_hat=-geometry.b_hat, preset="custom")


@dataclass(frozen=True)
class Level:
    branch: str
    m: float
    energy_shift: float


@dataclass(frozen=True, eq=False)
class Transition:
    m_g: float
    m_e: float
    q: int
    cg: float
    detuning: float
    coupling: np.ndarray
    ground_population: float = 0.5

    @property
    def weighted_coupling(self):
        return math.sqrt(self.ground_population) * self.coupling

    @property
    def label(self):
        return f"{_half(self.m_g)}->{_half(self.m_e)}"


def _half(m):
    n = int(round(2 * m))
    return f"{'+' if n > 0 else ''}{n}/2" if n % 2 else f"{n // 2:+d}"


@dataclass(frozen=True, eq=False)
class LevelScheme:
    species: NuclearSpecies
    geometry: GeometryConfig
    levels: list
    transitions: list

    def detunings(self):
        return np.array([t.detuning for t in self.transitions])

    def coupling_matrix(self):
        """6x2 matrix V with rows sqrt(p_g) * (c_sigma, c_pi)"""
        return np.array([t.weighted_coupling for t in self.transitions], dtype=complex)

    def bright_transitions(self, tol=1e-12):
        return [t for t in self.transitions if np.linalg.norm(t.coupling) > tol]

    def describe(self):
        """One dict per transition, for the levels command"""
        rows = []
        for t in self.transitions:
            rows.append({
                "transition": t.label,
                "m_g": t.m_g,
                "m_e": t.m_e,
                "q": t.q,
                "cg": t.cg,
                "detuning_gamma": t.detuning,
                "abs_c_sigma": float(abs(t.coupling[0])),
                "abs_c_pi": float(abs(t.coupling[1])),
                "ground_population": t.ground_population,
            })
        return rows


def spherical_basis(b_hat):
    """
    Spherical unit vectors (e_-1, e_0, e_+1) for quantization axis b_hat.

    e_0 = b_hat and e_+-1 = -+(e_a +- i e_b)/sqrt(2) with (e_a, e_b, b_hat)
    right-handed. For b_hat = pi this gives e_+1 proportional to sigma + i k0.
    """
    b_hat = np.asarray(b_hat, dtype=float)
    if b_hat.shape != (3,):
        raise ValidationError(f"b_hat must be a 3-vector, got shape {b_hat.shape}")
    _require_unit(b_hat, "b_hat")

    # reference axis for e_a: sigma when b_hat is close to pi, pi otherwise
    reference = SIGMA_HAT if abs(b_hat @ PI_HAT) > 0.9 else PI_HAT
    e_a = reference - (reference @ b_hat) * b_hat
    e_a /= np.linalg.norm(e_a)
    e_b = np.cross(b_hat, e_a)

    e_plus = -(e_a + 1j * e_b) / math.sqrt(2.0)
    e_minus = (e_a - 1j * e_b) / math.sqrt(2.0)
    return e_minus, b_hat.astype(complex), e_plus


@lru_cache(maxsize=None)
def _cg_exact(two_jg, two_mg, q, two_je):
    two_me = two_mg + 2 * q
    if abs(two_me) > two_je:
        return 0.0
    value = CG(Rational(two_jg, 2), Rational(two_mg, 2), 1, q,
               Rational(two_je, 2), Rational(two_me, 2)).doit()
    return float(value)


def clebsch_gordan(m_g, q, j_g=0.5, j_e=1.5):
    """<j_g m_g; 1 q | j_e m_g+q> in the Condon-Shortley convention; zero for forbidden lines"""
    if abs(q) > 1 or abs(m_g) > j_g:
        return 0.0
    return _cg_exact(int(round(2 * j_g)), int(round(2 * m_g)), int(q), int(round(2 * j_e)))


def zeeman_detuning(species, b_magnitude, m_g, m_e):
    """Line position of m_g -> m_e relative to the unsplit resonance, in units of gamma"""
    if b_magnitude < 0:
        raise ValidationError(f"field magnitude must be >= 0, got {b_magnitude}")
    mu_b = species.mu_n_ev_per_t * b_magnitude
    return (-species.g_excited * mu_b * m_e + species.g_ground * mu_b * m_g) / species.gamma_ev


def level_energy(species, b_magnitude, branch, m):
    return -species.g_factor(branch) * species.mu_n_ev_per_t * b_magnitude * m / species.gamma_ev


def transition_coupling(geometry, q, cg):
    """(c_sigma, c_pi) = cg * projection of e_q on the transverse polarizations; the k0 part is dropped"""
    if q not in (-1, 0, 1):
        raise ValidationError(f"q must be -1, 0 or +1, got {q}")
    e_q = spherical_basis(geometry.effective_b_hat)[q + 1]
    return cg * np.array([e_q @ SIGMA_HAT, e_q @ PI_HAT], dtype=complex)


def build_level_scheme(species, geometry):
    """Levels and the six M1 transitions, ordered by ascending detuning (ties by m_g, q)"""
    j_g, j_e = species.ground_spin, species.excited_spin
    ground_ms = [j_g - k for k in range(int(round(2 * j_g)) + 1)]
    excited_ms = [j_e - k for k in range(int(round(2 * j_e)) + 1)]

    levels = [Level("ground", m, level_energy(species, geometry.b_magnitude, "ground", m)) for m in ground_ms]
    levels += [Level("excited", m, level_energy(species, geometry.b_magnitude, "excited", m)) for m in excited_ms]

    population = 1.0 / len(ground_ms)
    transitions = []
    for m_g in ground_ms:
        for q in (-1, 0, 1):
            m_e = m_g + q
            if abs(m_e) > j_e + 1e-12:
                continue
            cg = clebsch_gordan(m_g, q, j_g, j_e)
            if cg == 0.0:
                continue
            transitions.append(Transition(
                m_g=m_g, m_e=m_e, q=q, cg=cg,
                detuning=zeeman_detuning(species, geometry.b_magnitude, m_g, m_e),
                coupling=transition_coupling(geometry, q, cg),
                ground_population=population,
            ))

    transitions.sort(key=lambda t: (round(t.detuning, 12), t.m_g, t.q))
    LOGGER.writeDebugLog(
        f"hyperfine: built scheme preset={geometry.preset} B={geometry.b_magnitude} T, "
        f"{len(transitions)} transitions, span {max(t.detuning for t in transitions) - min(t.detuning for t in transitions):.3f} gamma")
    return LevelScheme(species=species, geometry=geometry, levels=levels, transitions=transitions)
