import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def camera():
    data = pytest.importorskip("skimage.data")
    return data.camera()


@pytest.fixture(scope="session")
def natural_crop(camera):
    """A 64x64 photographic window used for codec fidelity checks."""
    return np.ascontiguousarray(camera[100:164, 100:164])


@pytest.fixture(scope="session")
def edge_crop(camera):
    """A 128x128 window with strong edges (tripod and coat)."""
    return np.ascontiguousarray(camera[64:192, 192:320])


def gradient_image(h=16, w=16):
    r, c = np.mgrid[0:h, 0:w]
    return (8 * r + 7 * c).clip(0, 255).astype(np.uint8)


@pytest.fixture(scope="session")
def small_dict(camera):
    """A quickly trained 120-atom dictionary for 10x10 patches (not for quality checks)."""
    from softjpeg.sparse_dict import ksvd_train, sample_training_patches

    patches = sample_training_patches([camera[:256, :256]], 10, 1500, seed=0)
    return ksvd_train(patches, 120, 4, 3, seed=0)


ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion; printed in the terminal summary."""
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
