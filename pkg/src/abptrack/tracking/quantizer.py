"""Scalar codebooks for ratio-metric feedback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike


@dataclass(frozen=True, eq=False)
class RatioCodebook:
    levels: np.ndarray
    boundaries: np.ndarray
    bits: int

    @classmethod
    def from_levels(cls, levels: ArrayLike, bits: int | None = None) -> "RatioCodebook":
        levels = np.sort(np.asarray(levels, dtype=float))
        if bits is None:
            bits = int(np.ceil(np.log2(max(levels.size, 2))))
        if levels.size > 2 ** bits:
            raise ValueError(f"{levels.size} levels do not fit in {bits} bits")
        return cls(levels, (levels[1:] + levels[:-1]) / 2, bits)

    @property
    def size(self) -> int:
        return self.levels.size

    def max_half_width(self, lo: float = -1.0, hi: float = 1.0) -> float:
        edges = np.concatenate([[lo], self.boundaries, [hi]])
        return float(np.max(np.maximum(self.levels - edges[:-1], edges[1:] - self.levels)))


def uniform_codebook(bits: int, lo: float = -1.0, hi: float = 1.0) -> RatioCodebook:
    n = 2 ** bits
    step = (hi - lo) / n
    return RatioCodebook.from_levels(lo + step * (np.arange(n) + 0.5), bits)


def quantize(value: ArrayLike, cb: RatioCodebook):
    """Nearest-level index; a value on a boundary maps to the lower index."""
    idx = np.searchsorted(cb.boundaries, np.asarray(value, dtype=float), side="left")
    return int(idx) if np.ndim(idx) == 0 else idx


def dequantize(index: ArrayLike, cb: RatioCodebook):
    out = cb.levels[np.asarray(index)]
    return float(out) if np.ndim(out) == 0 else out


def distortion(samples: ArrayLike, cb: RatioCodebook) -> float:
    x = np.asarray(samples, dtype=float)
    return float(np.mean((x - dequantize(quantize(x, cb), cb)) ** 2))


def lloyd_train(samples: ArrayLike, bits: int, *, init: ArrayLike | None = None,
                tol: float = 1e-9, level_tol: float = 1e-8, max_iter: int = 100_000) -> RatioCodebook:
    """Lloyd iterations from quantile initialisation until distortion settles.

    Distortion is flat near the optimum, so iteration also continues until
    no level moves by more than ``level_tol``.

    Deterministic: the default start places level ``i`` at the
    ``(i + 1/2) / L`` sample quantile.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n_levels = 2 ** bits
    if np.unique(x).size < n_levels:
        raise ValueError(f"need at least {n_levels} distinct samples for {bits} bits")
    if init is None:
        levels = np.quantile(x, (np.arange(n_levels) + 0.5) / n_levels)
    else:
        levels = np.sort(np.asarray(init, dtype=float))
        if levels.size != n_levels:
            raise ValueError(f"need {n_levels} initial levels")
    prev = np.inf
    for _ in range(max_iter):
        cuts = np.searchsorted(x, (levels[1:] + levels[:-1]) / 2, side="right")
        edges = np.concatenate([[0], cuts, [x.size]])
        sums = np.add.reduceat(x, np.minimum(edges[:-1], x.size - 1))
        counts = np.diff(edges)
        filled = counts > 0
        # reduceat returns x[i] for empty ranges; keep the old level there
        new = np.sort(np.where(filled, sums / np.maximum(counts, 1), levels))
        shift = float(np.max(np.abs(new - levels)))
        levels = new
        cb = RatioCodebook.from_levels(levels, bits)
        cur = distortion(x, cb)
        if abs(prev - cur) < tol and shift < level_tol:
            break
        prev = cur
    return cb
