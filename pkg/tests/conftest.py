import time

_RESULTS = []


class _Recorder:
    """Times one acceptance criterion and records its outcome for the
    end-of-session summary.  Raises if the stated runtime limit is blown."""

    def __init__(self, number, name, limit_s):
        self.number = number
        self.name = name
        self.limit_s = limit_s
        self.note = ""

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        ok = exc_type is None
        if ok and elapsed > self.limit_s:
            _RESULTS.append((self.number, self.name, "FAIL", elapsed, self.note
                             or f"runtime {elapsed:.1f}s > {self.limit_s}s"))
            raise AssertionError(
                f"criterion {self.number} exceeded runtime limit: "
                f"{elapsed:.1f}s > {self.limit_s}s")
        _RESULTS.append((self.number, self.name, "PASS" if ok else "FAIL",
                         elapsed, self.note))
        return False


def criterion(number, name, limit_s):
    return _Recorder(number, name, limit_s)


def pytest_sessionfinish(session, exitstatus):
    if not _RESULTS:
        return
    print("\n" + "=" * 72)
    print("ACCEPTANCE CRITERIA")
    print("=" * 72)
    for number, name, outcome, elapsed, note in sorted(_RESULTS):
        line = f"criterion {number:>2} {name:<38} {outcome}  ({elapsed:.1f}s)"
        if note:
            line += f"  [{note}]"
        print(line)
    print("=" * 72)
