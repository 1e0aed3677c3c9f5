#!/usr/bin/env python3
"""
Test Template for the SGC cavity simulator
Copy this file to create new tests and add them to the test runner.
"""

import sys
import os
sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))

import numpy as np

from src.physics.hyperfine import GeometryConfig, NuclearSpecies, build_level_scheme
from src.physics import liouvillian as lv
from src.physics import response as rs


def test_new_feature():
    """
    Template for testing a new feature.
    Replace the body with your own checks; raise (or assert) on failure.
    """
    scheme = build_level_scheme(NuclearSpecies.fe57(), GeometryConfig.from_preset("voigt45"))
    r = rs.reflection_matrix(scheme, lv.CavityParams(), 0.0)
    assert r.max_singular_value() <= 1.0 + 1e-12
    assert np.isfinite(r.r).all()
    print("✓ New feature test passed")


def main():
    """Run all tests"""
    print("=== New Feature Test ===\n")

    tests = [
        test_new_feature,
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

# ===============================================================
# TO ADD THIS TEST TO THE COMPREHENSIVE TEST RUNNER:
# ===============================================================
#
# 1. Create your test file in the tests/ directory
# 2. Follow the pattern above: plain functions that assert, collected in main()
# 3. Add a row to SUITES in scripts/run_tests.py:
#
#    ("your-flag", "Your Feature Tests", "test_your_feature.py", 120, True),
#
#    The last field says whether the suite runs in --quick mode; the flag
#    becomes a command line option that runs only that suite.
#
# ===============================================================
