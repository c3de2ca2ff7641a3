"""Simple test runner for the codesign explorer tests."""
import sys
from pathlib import Path

# Add the project root to sys.path
sys.path.insert(0, str(Path(__file__).resolve().parent))

# Import pytest
import pytest

if __name__ == "__main__":
    # Feature suites, bottom-up
    test_paths = [
        "tests/codesign/explorer/ip_catalog",
        "tests/codesign/explorer/bundle_arch",
        "tests/codesign/explorer/dnn_model",
        "tests/codesign/explorer/tile_sim",
        "tests/codesign/explorer/evaluation",
        "tests/codesign/explorer/scd_search",
        "tests/codesign/explorer/auto_hls",
        "tests/codesign/explorer/pipeline",
        "tests/codesign/run",
    ]

    failed = 0
    for test_path in test_paths:
        print(f"\n{'=' * 80}")
        print(f"Running tests in {test_path}")
        print(f"{'=' * 80}\n")
        if pytest.main(["-v", test_path]) != 0:
            failed += 1
    sys.exit(1 if failed else 0)
