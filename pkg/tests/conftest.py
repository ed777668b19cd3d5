"""Shared fixtures: the full three-lattice reference run that backs the
acceptance tests.

The run takes roughly 25 minutes single-worker, so it is session-scoped.
Set ERGOCHRON_ACCEPTANCE_CACHE to a directory path to build it once and
reuse it across sessions; a cached directory is revalidated against the
expected master seeds before being trusted (outputs are byte-deterministic,
so a valid cache is interchangeable with a fresh run).
"""

import os
from pathlib import Path

import pytest

from ergochron.runner import load_config, reproduce

ACCEPTANCE_SEED = 7
TABLE_LABELS = ("1d", "2d", "3d")


def _cache_valid(out: Path) -> bool:
    if not (out / "summary.csv").is_file():
        return False
    for idx, label in enumerate(TABLE_LABELS):
        cfg_path = out / label / "run.cfg"
        if not cfg_path.is_file():
            return False
        if load_config(cfg_path).master_seed != ACCEPTANCE_SEED + idx:
            return False
        if not (out / label / "echo_series.csv").is_file():
            return False
        if not (out / label / "stretch_summary.csv").is_file():
            return False
    return True


@pytest.fixture(scope="session")
def table1_dir(tmp_path_factory) -> Path:
    cache = os.environ.get("ERGOCHRON_ACCEPTANCE_CACHE")
    if cache:
        out = Path(cache)
        if _cache_valid(out):
            return out
        out.mkdir(parents=True, exist_ok=True)
    else:
        out = tmp_path_factory.mktemp("table1")
    reproduce("table1", ACCEPTANCE_SEED, str(out), workers=1)
    return out
