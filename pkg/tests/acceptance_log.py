"""Pass/fail lines collected by the acceptance tests and printed in the terminal summary."""

import contextlib
import time

LINES: list[str] = []


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record PASS/FAIL for one criterion; ``info`` entries are appended to the line."""
    info: dict = {}
    t0 = time.perf_counter()
    try:
        yield info
    except BaseException:
        _emit(number, title, "FAIL", info, time.perf_counter() - t0)
        raise
    _emit(number, title, "PASS", info, time.perf_counter() - t0)


def _emit(number, title, status, info, elapsed):
    details = ", ".join(f"{k}={v}" for k, v in info.items())
    line = f"[{status}] criterion {number}: {title} ({elapsed:.1f}s{'; ' + details if details else ''})"
    LINES.append(line)
    print(line)
