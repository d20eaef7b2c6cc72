import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(requested=None) -> int:
    """Thread cap: explicit argument, else ``ROBUST_SYSID_THREADS``, else 1."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("ROBUST_SYSID_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"ROBUST_SYSID_THREADS must be an integer, got {env!r}") from None
    return 1


def ordered_map(func, items, workers=None):
    """``list(map(func, items))``, optionally on a thread pool; order is preserved."""
    items = list(items)
    nw = worker_count(workers)
    if nw == 1 or len(items) < 2:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(func, items))
