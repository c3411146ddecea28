import pytest

from hazardlab import backend


@pytest.fixture(params=["numba", "numpy"])
def backend_name(request, monkeypatch):
    """Run the decorated test once per kernel backend."""
    if request.param == "numba" and not backend.HAS_NUMBA:
        pytest.skip("numba not importable")
    monkeypatch.setenv("HAZARD_LAB_BACKEND", request.param)
    return request.param


@pytest.fixture
def numpy_backend(monkeypatch):
    monkeypatch.setenv("HAZARD_LAB_BACKEND", "numpy")
