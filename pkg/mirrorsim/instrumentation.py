import logging
import time
from contextlib import contextmanager
from typing import Iterator, Optional


@contextmanager
def log_timing(label: str, logger: Optional[logging.Logger] = None) -> Iterator[None]:
    """Log start, duration and failure of a block of work."""
    logger = logger or logging.getLogger(__name__)
    start_time = time.perf_counter()
    logger.info(f"Start: {label}")
    try:
        yield
    except Exception as e:
        process_time = time.perf_counter() - start_time
        logger.error(f"Failed: {label} after {process_time:.3f}s - {e}")
        raise
    process_time = time.perf_counter() - start_time
    logger.info(f"Done: {label} in {process_time:.3f}s")
