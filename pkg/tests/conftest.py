import sys
from collections import defaultdict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = defaultdict(list)


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        n, text = marker.args
        detail = dict(item.user_properties).get("detail", "")
        _CRITERIA[(n, text)].append((call.excinfo is None, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (n, text), results in sorted(_CRITERIA.items()):
        ok = all(passed for passed, _ in results)
        details = "; ".join(d for _, d in results if d)
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}"
        terminalreporter.write_line(line + (f"  [{details}]" if details else ""))
