#!/usr/bin/env python3
"""
Test script for the 57Fe level scheme: Zeeman line positions, Clebsch-Gordan
weights and the polarization couplings of the three magnetization geometries
"""

import sys
import os
import math
sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))

import numpy as np

from src.core.errors import ValidationError
from src.physics.hyperfine import (GeometryConfig, NuclearSpecies, build_level_scheme, clebsch_gordan,
                                   reverse_field, spherical_basis, zeeman_detuning)

SPECIES = NuclearSpecies.fe57()


def scheme_for(preset, **kwargs):
    return build_level_scheme(SPECIES, GeometryConfig.from_preset(preset, **kwargs))


def test_line_positions():
    """Six lines at 33.3 T, in units of the natural width"""
    scheme = scheme_for("half_faraday")
    # E(m) = -g mu_N B m for each branch, line = E_e - E_g, divided by hbar gamma
    g_ground, g_excited, mu_n, gamma, field = 0.1812, -0.1033, 3.1525e-8, 4.66e-9, 33.3
    pairs = [(-0.5, -1.5), (-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5), (0.5, 1.5)]
    expected = [(-g_excited * m_e + g_ground * m_g) * mu_n * field / gamma for m_g, m_e in pairs]
    for got, want in zip(scheme.detunings(), expected):
        assert abs(got - want) < 1e-9, (got, want)
    assert abs(expected[0] + 55.316) < 1e-3 and abs(expected[1] + 32.045) < 1e-3
    labels = [t.label for t in scheme.transitions]
    assert labels == ["-1/2->-3/2", "-1/2->-1/2", "-1/2->+1/2", "+1/2->-1/2", "+1/2->+1/2", "+1/2->+3/2"]
    assert [t.q for t in scheme.transitions] == [-1, 0, 1, -1, 0, 1]
    span = scheme.detunings()[-1] - scheme.detunings()[0]
    assert abs(span - (expected[-1] - expected[0])) < 1e-9
    print("✓ Zeeman line positions")



def test_zero_field_is_degenerate():
    scheme = scheme_for("half_faraday", b_magnitude=0.0)
    assert np.all(scheme.detunings() == 0.0)
    assert len(scheme.transitions) == 6
    try:
        zeeman_detuning(SPECIES, -1.0, 0.5, 1.5)
        raise AssertionError("negative field accepted")
    except ValidationError:
        pass
    print("✓ B = 0 collapses the six lines")


def test_clebsch_gordan_ratios():
    """Line strengths 3:2:1 for |dm| transitions of a 1/2 -> 3/2 M1 line"""
    assert math.isclose(clebsch_gordan(0.5, 1), 1.0)
    assert math.isclose(clebsch_gordan(0.5, 0), math.sqrt(2.0 / 3.0))
    assert math.isclose(clebsch_gordan(0.5, -1), math.sqrt(1.0 / 3.0))
    assert math.isclose(clebsch_gordan(-0.5, -1), 1.0)
    assert math.isclose(clebsch_gordan(-0.5, 0), math.sqrt(2.0 / 3.0))
    assert math.isclose(clebsch_gordan(-0.5, 1), math.sqrt(1.0 / 3.0))
    assert clebsch_gordan(0.5, 2) == 0.0
    print("✓ Clebsch-Gordan coefficients")


def test_total_coupling_is_geometry_independent():
    for preset in ("faraday", "half_faraday", "voigt45"):
        scheme = scheme_for(preset)
        total = sum(float(np.linalg.norm(t.coupling) ** 2) for t in scheme.transitions)
        assert abs(total - 8.0 / 3.0) < 1e-12, (preset, total)
        weighted = float(np.sum(np.abs(scheme.coupling_matrix()) ** 2))
        assert abs(weighted - 4.0 / 3.0) < 1e-12
    print("✓ sum of |c_t|^2 = 8/3 for every geometry")


def test_spherical_basis_is_orthonormal():
    for b in ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.48, 0.6, 0.64]):
        basis = np.array(spherical_basis(np.array(b)))
        gram = basis.conj() @ basis.T
        assert np.allclose(gram, np.eye(3), atol=1e-12), b
    try:
        spherical_basis(np.array([1.0, 1.0, 0.0]))
        raise AssertionError("non-unit field direction accepted")
    except ValidationError:
        pass
    print("✓ spherical basis orthonormal")


def test_voigt45_couplings():
    """b along sigma: q = 0 couples to sigma only, q = +-1 to pi only"""
    scheme = scheme_for("voigt45")
    for t in scheme.transitions:
        if t.q == 0:
            assert abs(t.coupling[1]) < 1e-12 and abs(abs(t.coupling[0]) - t.cg) < 1e-12
        else:
            assert abs(t.coupling[0]) < 1e-12
            assert abs(abs(t.coupling[1]) - t.cg / math.sqrt(2.0)) < 1e-12
    print("✓ 45-degree Voigt couplings")


def test_half_faraday_couplings():
    scheme = scheme_for("half_faraday")
    by_label = {t.label: t.coupling for t in scheme.transitions}
    assert np.allclose(by_label["+1/2->+1/2"], [math.sqrt(1.0 / 3.0), 0.0], atol=1e-12)
    assert np.allclose(by_label["+1/2->+3/2"], [-0.5j, -1.0 / math.sqrt(2.0)], atol=1e-12)
    assert np.allclose(by_label["-1/2->-3/2"], [-0.5j, 1.0 / math.sqrt(2.0)], atol=1e-12)
    weak = math.sqrt(1.0 / 3.0)
    assert np.allclose(by_label["-1/2->+1/2"], weak * np.array([-0.5j, -1.0 / math.sqrt(2.0)]), atol=1e-12)
    print("✓ half-Faraday couplings")


def test_faraday_dark_lines():
    scheme = scheme_for("faraday")
    dark = [t for t in scheme.transitions if np.linalg.norm(t.coupling) < 1e-12]
    assert sorted(t.q for t in dark) == [0, 0]
    assert len(scheme.bright_transitions()) == 4

    tilted = scheme_for("faraday", misalignment=("pi", 5.0))
    assert len(tilted.bright_transitions()) == 6
    q0 = [t for t in tilted.transitions if t.q == 0]
    expected = math.sin(math.radians(5.0)) * math.sqrt(2.0 / 3.0)
    assert all(abs(np.linalg.norm(t.coupling) - expected) < 1e-12 for t in q0)
    print("✓ Faraday q = 0 lines dark, bright after a 5 degree tilt")


def test_misalignment_zero_is_identity():
    plain = GeometryConfig.from_preset("half_faraday")
    zero = GeometryConfig.from_preset("half_faraday", misalignment=("k0", 0.0))
    assert np.array_equal(plain.effective_b_hat, zero.effective_b_hat)
    a = build_level_scheme(SPECIES, plain).coupling_matrix()
    b = build_level_scheme(SPECIES, zero).coupling_matrix()
    assert np.array_equal(a, b)
    print("✓ zero misalignment leaves the scheme unchanged")


def test_reverse_field_conjugates_transverse_couplings():
    """Reversing B maps q = +-1 couplings to their complex conjugates and flips q = 0"""
    geometry = GeometryConfig.from_preset("half_faraday")
    forward = build_level_scheme(SPECIES, geometry)
    backward = build_level_scheme(SPECIES, reverse_field(geometry))
    assert np.allclose(forward.detunings(), backward.detunings())
    for f, b in zip(forward.transitions, backward.transitions):
        sign = -1.0 if f.q == 0 else 1.0
        assert np.allclose(b.coupling, sign * np.conj(f.coupling), atol=1e-12)
    print("✓ field reversal")


def test_geometry_validation():
    for bad in (dict(preset="diagonal"), dict(b_magnitude=-1.0), dict(in_polarization=(1.0, 1.0))):
        try:
            if "preset" in bad:
                GeometryConfig.from_preset(bad["preset"])
            else:
                GeometryConfig.from_preset("faraday", **bad)
            raise AssertionError(f"accepted {bad}")
        except ValidationError:
            pass
    try:
        NuclearSpecies.fe57(gamma_ev=0.0)
        raise AssertionError("zero linewidth accepted")
    except ValidationError:
        pass
    print("✓ geometry and species validation")


def main():
    """Run all tests"""
    print("=== Hyperfine Level Scheme Tests ===\n")

    tests = [
        test_line_positions,
        test_zero_field_is_degenerate,
        test_clebsch_gordan_ratios,
        test_total_coupling_is_geometry_independent,
        test_spherical_basis_is_orthonormal,
        test_voigt45_couplings,
        test_half_faraday_couplings,
        test_faraday_dark_lines,
        test_misalignment_zero_is_identity,
        test_reverse_field_conjugates_transverse_couplings,
        test_geometry_validation,
    ]

    passed = 0
    failed = 0
    for test in tests:
        try:
            test()
            passed += 1
        except Exception as e:
            print(f"✗ Test {test.__name__} failed: {type(e).__name__}: {e}")
            failed += 1

    print(f"\n=== Test Results ===")
    print(f"Passed: {passed}")
    print(f"Failed: {failed}")
    return failed == 0


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
