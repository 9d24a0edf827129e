import pytest
from pydantic import ValidationError

from app.dependencies import THREADS_VARIABLE, Settings, get_executor, get_settings


def test_default_settings(monkeypatch):
    monkeypatch.delenv(THREADS_VARIABLE, raising=False)
    assert get_settings().threads == 1


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv(THREADS_VARIABLE, "4")
    assert get_settings().threads == 4
    monkeypatch.setenv(THREADS_VARIABLE, "0")
    with pytest.raises(ValidationError):
        get_settings()


def test_executor_is_shut_down_after_the_job():
    with get_executor(Settings(threads=2)) as pool:
        assert list(pool.map(lambda n: n * n, range(4))) == [0, 1, 4, 9]
    with pytest.raises(RuntimeError):
        pool.submit(print)
