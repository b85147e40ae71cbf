from pathlib import Path

import pytest

ML100K = Path(__file__).resolve().parents[1] / "data" / "ml-100k" / "u.data"


@pytest.fixture(scope="session")
def ml100k_path():
    if not ML100K.is_file():
        pytest.skip(f"MovieLens 100K not found at {ML100K}; see README for how to obtain it")
    return ML100K
