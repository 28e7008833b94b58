"""Collects one pass/fail line per acceptance criterion."""

RESULTS: dict[int, tuple[bool, str, str]] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    RESULTS[number] = (bool(ok), title, detail)


def lines() -> list[str]:
    out = []
    for n in sorted(RESULTS):
        ok, title, detail = RESULTS[n]
        out.append(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {title} | {detail}")
    return out
