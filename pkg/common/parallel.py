from concurrent.futures import ThreadPoolExecutor

from common.conf import lab_setting


def ordered_map(fn, items, threads=None):
    """Apply ``fn`` to every item, in parallel threads, and return results in input order.

    numpy/scipy release the GIL inside LAPACK, so threads are enough for per-sector work.
    """
    items = list(items)
    threads = lab_setting("THREADS", threads)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
