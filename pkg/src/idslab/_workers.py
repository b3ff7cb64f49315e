"""Worker pool sized by ``IDSLAB_THREADS``; results always come back in input order."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("IDSLAB_THREADS", "1").strip()
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"IDSLAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def pmap(fn, items, workers: int | None = None) -> list:
    items = list(items)
    workers = thread_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def chunks(n: int, parts: int) -> list[range]:
    parts = max(1, min(parts, n)) if n else 1
    step, extra = divmod(n, parts)
    out, start = [], 0
    for i in range(parts):
        stop = start + step + (1 if i < extra else 0)
        out.append(range(start, stop))
        start = stop
    return out
