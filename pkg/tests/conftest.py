import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_log import LINES  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not LINES:
        return
    terminalreporter.section("acceptance criteria")
    def order(key):
        label = str(key[0])
        return int("".join(c for c in label if c.isdigit())), label, key[1]

    for key in sorted(LINES, key=order):
        terminalreporter.write_line(LINES[key])
