import contextlib

CRITERIA = {}


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record the outcome of an acceptance criterion for the end-of-run summary."""
    detail = {}
    try:
        yield detail
    except BaseException:
        CRITERIA[number] = ("FAIL", title, detail)
        raise
    CRITERIA[number] = ("PASS", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        status, title, detail = CRITERIA[number]
        extra = ", ".join(f"{k}={v}" for k, v in detail.items())
        terminalreporter.write_line(f"criterion {number}: {status}  {title}" + (f"  [{extra}]" if extra else ""))
