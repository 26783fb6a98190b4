"""Order-stable compensated reductions.

Terms are cut into fixed-size chunks whose boundaries never depend on the
worker count.  Each chunk is summed with ``math.fsum`` (exactly rounded) and
the chunk partials are combined, again with ``fsum``, in chunk order.  The
result is therefore bit-identical for any number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

WORKERS_ENV = "TOWERKERNEL_WORKERS"
CHUNK = 4096


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _fsum_columns(block: np.ndarray) -> np.ndarray:
    """Exactly rounded column sums of a 2-D complex block."""
    out = np.empty(block.shape[1], dtype=complex)
    re = np.ascontiguousarray(block.real.T)
    im = np.ascontiguousarray(block.imag.T)
    for k in range(block.shape[1]):
        out[k] = complex(math.fsum(re[k]), math.fsum(im[k]))
    return out


def chunked_sum(term_block, n_terms: int, n_cols: int, workers: int | None = None,
                chunk: int = CHUNK) -> np.ndarray:
    """Sum ``term_block(start, stop)`` over rows [0, n_terms).

    ``term_block`` returns a (stop - start, n_cols) complex array.  Returns the
    column sums as a complex vector of length ``n_cols``.
    """
    if n_terms == 0:
        return np.zeros(n_cols, dtype=complex)
    bounds = [(s, min(s + chunk, n_terms)) for s in range(0, n_terms, chunk)]

    def work(bound):
        block = np.asarray(term_block(*bound), dtype=complex).reshape(bound[1] - bound[0], n_cols)
        return _fsum_columns(block)

    workers = worker_count() if workers is None else workers
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(work, bounds))
    else:
        partials = [work(b) for b in bounds]
    if len(partials) == 1:
        return partials[0]
    return _fsum_columns(np.vstack(partials))


def det_sum(values) -> complex:
    """Deterministic compensated sum of a 1-D array of complex terms."""
    values = np.asarray(values, dtype=complex).ravel()
    return complex(chunked_sum(lambda s, e: values[s:e, None], values.size, 1)[0])


def det_fsum(values) -> float:
    values = np.asarray(values, dtype=float).ravel()
    return math.fsum(values)


class KahanAccumulator:
    """Neumaier-compensated elementwise accumulation of equally shaped arrays."""

    def __init__(self, shape, dtype=complex):
        self.total = np.zeros(shape, dtype=dtype)
        self._comp = np.zeros(shape, dtype=dtype)

    def add(self, x) -> None:
        x = np.asarray(x)
        if np.iscomplexobj(self.total):
            self.total, self._comp = _neumaier_complex(self.total, self._comp, x)
        else:
            self.total, self._comp = _neumaier(self.total, self._comp, x)

    @property
    def value(self):
        return self.total + self._comp


def _neumaier(total, comp, x):
    t = total + x
    big = np.abs(total) >= np.abs(x)
    comp = comp + np.where(big, (total - t) + x, (x - t) + total)
    return t, comp


def _neumaier_complex(total, comp, x):
    tr, cr = _neumaier(total.real, comp.real, np.real(x))
    ti, ci = _neumaier(total.imag, comp.imag, np.imag(x))
    return tr + 1j * ti, cr + 1j * ci
