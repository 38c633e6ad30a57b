"""Shared record of acceptance outcomes, printed at the end of the run."""

LINES = {}


def record(criterion, part, passed, detail):
    """Store and print one pass/fail line, then return ``passed``."""
    line = f"criterion {criterion:>4} {part:<34} {'PASS' if passed else 'FAIL'}  {detail}"
    LINES[(criterion, part)] = line
    print(line)
    return passed
