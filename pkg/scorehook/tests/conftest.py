from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture()
def dataset_path() -> Path:
    return FIXTURES / "dataset.jsonl"


@pytest.fixture()
def manifest(dataset_path):
    from scorehook import manifest_from_dataset_file

    return manifest_from_dataset_file(dataset_path)
