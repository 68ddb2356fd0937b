"""Collects one pass/fail line per acceptance criterion."""

LINES = []


def record(number, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2} {name}: {detail}"
    LINES.append(line)
    print(line)
    return passed
