#!/usr/bin/env python3
"""
Test runner for the SGC cavity simulator
Runs every test script in its own interpreter, collects the per-check counts each
script prints and reports them per suite.
"""

import sys
import os
import re
import json
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

# (flag, section title, test file, timeout in seconds, part of --quick)
SUITES = [
    ("component", "Core Component Tests", "test_components.py", 60, True),
    ("hyperfine", "Level Scheme Tests", "test_hyperfine.py", 60, True),
    ("liouvillian", "Master Equation Tests", "test_liouvillian.py", 300, True),
    ("response", "Cavity Response Tests", "test_response.py", 300, True),
    ("oracle", "Layer Oracle Tests", "test_layer_oracle.py", 300, False),
    ("cli", "Command Line Tests", "test_cli.py", 600, False),
]

STATUS_MARKS = {
    'PASS': ('✅', '\033[92m'),
    'FAIL': ('❌', '\033[91m'),
    'SKIP': ('⏭️', '\033[93m'),
    'ERROR': ('💥', '\033[91m'),
}
COUNT_PATTERN = re.compile(r"^(Passed|Failed):\s*(\d+)\s*$", re.MULTILINE)


@dataclass
class SuiteOutcome:
    title: str
    status: str
    checks_passed: int = 0
    checks_failed: int = 0
    seconds: float = 0.0
    failures: list = field(default_factory=list)
    output: str = ""


def parse_counts(stdout):
    """Passed/Failed counts printed by a test script's main(); (0, 0) when absent"""
    counts = {"Passed": 0, "Failed": 0}
    for label, value in COUNT_PATTERN.findall(stdout or ""):
        counts[label] = int(value)
    return counts["Passed"], counts["Failed"]


def failed_checks(stdout):
    return [line.strip() for line in (stdout or "").split('\n') if line.lstrip().startswith('✗')]


def banner(title, char='=', width=60, mark='🧪'):
    print(f"\n{char * width}")
    print(f"{mark} {title}")
    print(f"{char * width}")


class TestRunner:
    def __init__(self, project_root=PROJECT_ROOT):
        self.project_root = Path(project_root)
        self.tests_dir = self.project_root / "tests"
        self.outcomes = []

    def child_env(self):
        env = os.environ.copy()
        env['PYTHONPATH'] = str(self.project_root)
        # keep test runs out of the regular log directory
        env.setdefault('SGC_LOG_DIR', str(self.project_root / "logs" / "tests"))
        return env

    def run_suite(self, title, test_file, timeout):
        """Run one test script and record its outcome"""
        banner(title, char='─', width=40, mark='📋')
        test_path = self.tests_dir / test_file
        if not test_path.exists():
            return self.record(SuiteOutcome(title, 'SKIP', output=f"Test file not found: {test_file}"))

        started = time.time()
        try:
            result = subprocess.run(
                [sys.executable, str(test_path)],
                capture_output=True,
                text=True,
                timeout=timeout,
                cwd=str(self.project_root),
                env=self.child_env()
            )
        except subprocess.TimeoutExpired:
            return self.record(SuiteOutcome(title, 'ERROR', seconds=timeout,
                                            output=f"Test timed out after {timeout} seconds"))
        except OSError as e:
            return self.record(SuiteOutcome(title, 'ERROR', output=f"Could not start {test_file}: {e}"))

        passed, failed = parse_counts(result.stdout)
        outcome = SuiteOutcome(title, 'PASS' if result.returncode == 0 else 'FAIL',
                               checks_passed=passed, checks_failed=failed,
                               seconds=round(time.time() - started, 2),
                               failures=failed_checks(result.stdout))
        if outcome.status == 'FAIL':
            outcome.output = f"Exit code: {result.returncode}\nSTDERR:\n{result.stderr.strip()}"
        return self.record(outcome)

    def record(self, outcome):
        emoji, color = STATUS_MARKS.get(outcome.status, ('❓', '\033[0m'))
        print(f"{emoji} {color}{outcome.title:<35} [{outcome.status}]\033[0m "
              f"{outcome.checks_passed} ok / {outcome.checks_failed} failed in {outcome.seconds:.1f}s")
        for line in outcome.failures:
            print(f"   {line}")
        if outcome.status != 'PASS' and outcome.output:
            for line in outcome.output.split('\n'):
                if line.strip():
                    print(f"   {line}")
        self.outcomes.append(outcome)
        return outcome

    def check_sample_config(self):
        """The shipped sample config must parse and pass validation"""
        banner("Configuration Tests", char='─', width=40, mark='📋')
        config_path = self.project_root / "config" / "config_sample.json"
        try:
            with open(config_path, 'r') as f:
                json.load(f)
            from src.core.config_handling import parse_config
            config = parse_config(str(config_path))
            outcome = SuiteOutcome("Sample Config Validation", 'PASS', checks_passed=1,
                                   output=f"config hash {config.config_hash()[:12]}")
        except Exception as e:
            outcome = SuiteOutcome("Sample Config Validation", 'FAIL', checks_failed=1,
                                   output=f"{config_path.name}: {type(e).__name__}: {e}")
        return self.record(outcome)

    def report(self):
        """Print the summary table; True when nothing failed and something ran"""
        banner("TEST RESULTS SUMMARY")
        by_status = {status: [o for o in self.outcomes if o.status == status] for status in STATUS_MARKS}
        broken = by_status['FAIL'] + by_status['ERROR']

        print(f"{'Suite':<35} {'Status':<6} {'Checks':>10} {'Time':>9}")
        for o in self.outcomes:
            checks = f"{o.checks_passed}/{o.checks_passed + o.checks_failed}"
            print(f"{o.title:<35} {o.status:<6} {checks:>10} {o.seconds:>8.1f}s")

        total_checks = sum(o.checks_passed + o.checks_failed for o in self.outcomes)
        print(f"\nSuites: ✅ {len(by_status['PASS'])}  ❌ {len(broken)}  ⏭️ {len(by_status['SKIP'])}")
        if total_checks:
            ok = sum(o.checks_passed for o in self.outcomes)
            print(f"📊 Checks passed: {ok}/{total_checks} ({100.0 * ok / total_checks:.1f}%)")

        if broken:
            print(f"\n⚠️ {len(broken)} suite(s) failed: {', '.join(o.title for o in broken)}")
            return False
        if not by_status['PASS']:
            print(f"\n⚠️ No tests were executed. Check test configuration.")
            return False
        print(f"\n🎉 ALL TESTS PASSED!")
        return True

    def run_all(self, quick=False, only=None):
        """Run all suites, or only the ones whose flags are listed in only"""
        banner("SGC CAVITY SIMULATOR - TEST SUITE")
        print(f"Project Root: {self.project_root}")
        print(f"Test Mode: {'Quick' if quick else 'Full'}")
        print(f"Python: {sys.executable}")

        if not only or "config" in only:
            self.check_sample_config()
        for flag, title, test_file, timeout, in_quick in SUITES:
            if only and flag not in only:
                continue
            if quick and not in_quick:
                self.record(SuiteOutcome(title, 'SKIP', output="skipped in quick mode"))
                continue
            self.run_suite(title, test_file, timeout)

        return self.report()


def main():
    """Main entry point"""
    import argparse

    parser = argparse.ArgumentParser(description="SGC Cavity Simulator Test Runner")
    parser.add_argument("--quick", action="store_true", help="Skip the slow oracle and command-line suites")
    parser.add_argument("--config", action="store_true", help="Run only the sample configuration check")
    for flag, title, _, _, _ in SUITES:
        parser.add_argument(f"--{flag}", action="store_true", help=f"Run only {title.lower()}")

    args = parser.parse_args()
    only = [flag for flag in ["config"] + [s[0] for s in SUITES] if getattr(args, flag)]

    return TestRunner().run_all(quick=args.quick, only=only)


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
