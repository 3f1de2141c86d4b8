"""Session fixtures: synthetic scenes generated once, reused everywhere."""

from __future__ import annotations

import sys

import pytest

from helpers import BENCHMARK_SPEC
from satbayes.pipeline import load_stack, parse_manifest
from satbayes.synth import generate_synthetic, parse_synth_spec


@pytest.fixture(scope="session")
def benchmark_dir(tmp_path_factory):
    """On-disk 64x64x20 two-class scene with 3 corrupted frames."""
    root = tmp_path_factory.mktemp("benchmark")
    spec_path = root / "scene.txt"
    spec_path.write_text(BENCHMARK_SPEC)
    manifest = generate_synthetic(parse_synth_spec(spec_path), root / "data")
    return manifest


@pytest.fixture(scope="session")
def benchmark_stack(benchmark_dir):
    return load_stack(parse_manifest(benchmark_dir))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One verdict line per acceptance criterion, capture-proof."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None) if module else None
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num, label, passed, seconds in sorted(results):
        terminalreporter.write_line(
            f"criterion {num:2d} {'PASS' if passed else 'FAIL'}  "
            f"{label} ({seconds:.2f} s)"
        )
