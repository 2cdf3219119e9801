import numpy as np
import pytest
from PIL import Image

from ptge.embeddings import EmbeddingTable


def pytest_runtest_logreport(report):
    # one pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1].removeprefix("test_")
        print(f"\nACCEPTANCE {name}: {'PASS' if report.passed else 'FAIL'}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_table(rng, n: int, dim: int, prefix: str = "item") -> EmbeddingTable:
    return EmbeddingTable.from_entries(
        (f"{prefix}{i:05d}", rng.standard_normal(dim).astype(np.float32))
        for i in range(n)
    )


@pytest.fixture
def small_table(rng):
    return random_table(rng, 20, 8)


def make_test_image(path, size=(64, 48), color=(200, 30, 90)):
    """Solid-color RGB image with a gradient strip so masking is visible."""
    img = Image.new("RGB", size, color)
    px = img.load()
    for x in range(size[0]):
        px[x, 0] = (x * 255 // max(size[0] - 1, 1), 255, 0)
    img.save(path)
    return path


@pytest.fixture
def corpus_dir(tmp_path):
    d = tmp_path / "corpus"
    d.mkdir()
    for i in range(5):
        make_test_image(d / f"img{i}.png", color=(40 * i, 90, 255 - 30 * i))
    return d
