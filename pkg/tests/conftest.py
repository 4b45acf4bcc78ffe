"""Shared fixtures: deterministic ensemble runs reused across test modules.

Runs are bit-reproducible, so they can be cached between sessions by setting
RANDBOSON_TEST_CACHE to a directory; without it each session regenerates into
its own tmp dir.
"""

import os
from pathlib import Path

import pytest

from randboson.ensemble import EnsembleConfig, run_ensemble


def _run_cached(config: EnsembleConfig, tmp_factory, name: str) -> Path:
    cache = os.environ.get("RANDBOSON_TEST_CACHE")
    if cache:
        path = Path(cache) / f"{name}-{config.hash()}.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
    else:
        path = tmp_factory.mktemp("ensembles") / f"{name}.jsonl"
    if not path.exists():
        run_ensemble(config, path)
    return path


@pytest.fixture(scope="session")
def small_run_l3(tmp_path_factory):
    """Tiny spin-3 run with stored vectors, for IO and analysis plumbing."""
    config = EnsembleConfig(ell=3, n_list=(4, 8), realizations=200,
                            master_seed=90210, primed=True,
                            store_vectors=True, vector_js=(0,))
    return _run_cached(config, tmp_path_factory, "l3-small")


@pytest.fixture(scope="session")
def small_run_l2(tmp_path_factory):
    """Spin-2 run over N=3 and 6 with vectors, for cluster diagnostics."""
    config = EnsembleConfig(ell=2, n_list=(3, 6), realizations=150,
                            master_seed=321, primed=True,
                            store_vectors=True, vector_js=(0,))
    return _run_cached(config, tmp_path_factory, "l2-small")


@pytest.fixture(scope="session")
def acceptance_run_l5(tmp_path_factory):
    """Primed spin-5 ensemble over N=4,6,8 (spin statistics and Q matrix)."""
    config = EnsembleConfig(ell=5, n_list=(4, 6, 8), realizations=5000,
                            master_seed=20260807, primed=True,
                            store_vectors=True, vector_js=(0, 32))
    return _run_cached(config, tmp_path_factory, "l5-stats")


@pytest.fixture(scope="session")
def acceptance_run_l5_gumbel(tmp_path_factory):
    """Primed spin-5, N=6 ensemble sized for extreme-value fits."""
    config = EnsembleConfig(ell=5, n_list=(6,), realizations=20000,
                            master_seed=20260808, primed=True)
    return _run_cached(config, tmp_path_factory, "l5-gumbel")


@pytest.fixture(scope="session")
def acceptance_run_l6_clusters(tmp_path_factory):
    """Primed spin-6 ensemble over N=3,6,9 with stored J=0 vectors."""
    config = EnsembleConfig(ell=6, n_list=(3, 6, 9), realizations=400,
                            master_seed=20260809, primed=True,
                            store_vectors=True, vector_js=(0,))
    return _run_cached(config, tmp_path_factory, "l6-clusters")


@pytest.fixture(scope="session")
def acceptance_run_l6_venn(tmp_path_factory):
    """Primed spin-6 ensemble over N=4,8,12 (hour-scale, spin labels only)."""
    config = EnsembleConfig(ell=6, n_list=(4, 8, 12), realizations=2000,
                            master_seed=20260810, primed=True,
                            track_gap=False)
    return _run_cached(config, tmp_path_factory, "l6-venn")


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    marker_name = getattr(report, "_acceptance_label", None)
    if marker_name:
        print(f"\nACCEPTANCE {marker_name}: {'PASS' if report.passed else 'FAIL'}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        report._acceptance_label = marker.args[0]


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): acceptance-criterion test, prints PASS/FAIL")
