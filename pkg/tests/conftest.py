import numpy as np
import pytest

from facemixup.synthfaces import SchematicFaceSpec, render_face


@pytest.fixture(scope="session")
def faces():
    """Twelve schematic faces: four seeds for each of the three default classes."""
    out = []
    for seed in range(4):
        for cls in ("happy", "sad", "angry"):
            img, lms, label = render_face(SchematicFaceSpec(cls, jitter=0.4, seed=seed, noise=20))
            out.append((img, lms, label))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(name, ok, detail=""):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" -- {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
