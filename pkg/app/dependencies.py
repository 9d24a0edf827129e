import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Iterator, Optional

from pydantic import BaseModel, Field

THREADS_VARIABLE = "DEQUANT_THREADS"


class Settings(BaseModel):
    threads: int = Field(default=1, ge=1)


def get_settings() -> Settings:
    """
    Read the runtime settings from the environment.

    Returns:
        Settings: ``threads`` from ``DEQUANT_THREADS`` (default 1).

    Raises:
        pydantic.ValidationError: If the variable is not a positive integer.
    """
    raw = os.environ.get(THREADS_VARIABLE)
    return Settings() if raw is None else Settings(threads=raw)


@contextmanager
def get_executor(settings: Optional[Settings] = None) -> Iterator[ThreadPoolExecutor]:
    """
    Provide a worker pool for one job.

    Yields:
        ThreadPoolExecutor: A pool bounded by ``Settings.threads``.

    Ensures that the pool is shut down after the job is processed.
    """
    settings = settings or get_settings()
    executor = ThreadPoolExecutor(max_workers=settings.threads)
    try:
        yield executor
    finally:
        executor.shutdown(wait=True)
