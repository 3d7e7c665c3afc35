"""Receive-combining calibration of per-element phase and amplitude errors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from .arrays import ArrayGeometry, ImpairmentModel, steering_upa, wrap_spatial
from .numerics import solve_linear

SINGLE_SOURCE = "single_source"
DISTRIBUTED = "distributed"
METHODS = (SINGLE_SOURCE, DISTRIBUTED)

SNR_DEFINITION = "mean_i |a_i^H C a_src|^2 / noise_variance"


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    c_hat: np.ndarray
    k: np.ndarray
    residual: np.ndarray | None
    method: str
    snr_db: float | None
    noise_variance: float

    @property
    def c_hat_matrix(self) -> np.ndarray:
        return np.diag(self.c_hat)

    @property
    def k_matrix(self) -> np.ndarray:
        return np.diag(self.k)


def _diagonal(c_true: ImpairmentModel | ArrayLike) -> np.ndarray:
    if isinstance(c_true, ImpairmentModel):
        return c_true.diagonal
    c = np.asarray(c_true, dtype=complex)
    return np.diag(c).copy() if c.ndim == 2 else c


def dft_directions(geom: ArrayGeometry) -> list[tuple[float, float]]:
    """Grid ``(2 pi i_el / N_x, 2 pi i_az / N_y)`` in element order."""
    return [(wrap_spatial(2 * math.pi * i / geom.n_x), wrap_spatial(2 * math.pi * j / geom.n_y))
            for i in range(geom.n_x) for j in range(geom.n_y)]


def _noise_variance(responses: np.ndarray, snr_db: float | None) -> float:
    if snr_db is None:
        return 0.0
    return float(np.mean(np.abs(responses) ** 2)) / 10 ** (snr_db / 10)


def _cn(rng: np.random.Generator, var: float, shape) -> np.ndarray:
    if var == 0:
        return np.zeros(shape, dtype=complex)
    return math.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _result(c_hat, c, method, snr_db, var) -> CalibrationResult:
    if np.any(c_hat == 0):
        raise np.linalg.LinAlgError("estimated zero element gain, calibration matrix undefined")
    return CalibrationResult(c_hat, 1.0 / c_hat, c_hat - c, method, snr_db, var)


def calibrate_single(c_true: ImpairmentModel | ArrayLike, geom: ArrayGeometry, snr_db: float | None,
                     rng: np.random.Generator | int | None = None, *, x: complex = 1.0,
                     directions: list[tuple[float, float]] | None = None) -> CalibrationResult:
    """One broadside source observed through ``N_tot`` DFT receive beams, one at a time.

    ``snr_db=None`` gives a noiseless calibration.
    """
    rng = np.random.default_rng(rng)
    c = _diagonal(c_true)
    n = geom.n_tot
    dirs = dft_directions(geom) if directions is None else directions
    if len(dirs) != n:
        raise ValueError(f"need {n} receive directions, got {len(dirs)}")
    a = np.array([steering_upa(geom, el, az).conj() for el, az in dirs])
    src = steering_upa(geom, 0.0, 0.0)
    clean = a @ (c * src) * x
    var = _noise_variance(clean, snr_db)
    noise = _cn(rng, var, (n, n))
    y = clean + np.einsum("ij,ij->i", a, noise)
    # the broadside response is the ones vector scaled by 1/sqrt(N)
    c_hat = math.sqrt(n) * solve_linear(a, y / x)
    return _result(c_hat, c, SINGLE_SOURCE, snr_db, var)


def distributed_layout(geom: ArrayGeometry, n_rf: int) -> tuple[list, list]:
    """Receive beams and source directions for the distributed method.

    Beams are the first ``n_rf`` DFT directions; sources sit at minus every
    ``n_rf``-th DFT direction, so beam/source differences tile the grid.
    """
    n = geom.n_tot
    if n_rf < 1 or n % n_rf:
        raise ValueError(f"N_RF={n_rf} must divide N_tot={n}")
    grid = dft_directions(geom)
    beams = grid[:n_rf]
    sources = [(wrap_spatial(-grid[s * n_rf][0]), wrap_spatial(-grid[s * n_rf][1])) for s in range(n // n_rf)]
    return beams, sources


def calibrate_distributed(c_true: ImpairmentModel | ArrayLike, geom: ArrayGeometry, n_rf: int, n_rs: int,
                          snr_db: float | None, rng: np.random.Generator | int | None = None, *,
                          x: complex = 1.0, beams: list | None = None, sources: list | None = None
                          ) -> CalibrationResult:
    """``N_RS`` incoherent sources, each received by ``N_RF`` simultaneous beams.

    Only the diagonal of ``C`` is unknown, so the system keeps the columns
    of ``B^T (x) A`` that multiply diagonal entries.
    """
    rng = np.random.default_rng(rng)
    c = _diagonal(c_true)
    n = geom.n_tot
    if n_rf * n_rs != n:
        raise ValueError(f"N_RS * N_RF = {n_rs * n_rf} does not equal N_tot = {n}")
    if beams is None or sources is None:
        b0, s0 = distributed_layout(geom, n_rf)
        beams = b0 if beams is None else beams
        sources = s0 if sources is None else sources
    a_bar = np.array([steering_upa(geom, el, az).conj() for el, az in beams])
    b = np.array([steering_upa(geom, el, az) for el, az in sources]).T
    clean = a_bar @ (c[:, None] * b) * x
    var = _noise_variance(clean, snr_db)
    y = clean + a_bar @ _cn(rng, var, (n, n_rs))
    # row (s, f) of vec(Y): sum_i a_bar[f, i] c_i b[i, s]
    v = (b.T[:, None, :] * a_bar[None, :, :]).reshape(n_rs * n_rf, n)
    try:
        c_hat = solve_linear(v, y.T.ravel() / x)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"distributed calibration system is rank deficient for beams {beams} and sources {sources}") from exc
    return _result(c_hat, c, DISTRIBUTED, snr_db, var)


def apply_calibration(k: ArrayLike, beam: ArrayLike) -> np.ndarray:
    """``K @ beam`` for a diagonal ``K`` given by its diagonal (or full matrix)."""
    k = np.asarray(k)
    beam = np.asarray(beam)
    if k.ndim == 2:
        k = np.diag(k)
    if k.shape != beam.shape:
        raise ValueError(f"calibration has {k.size} entries, beam has {beam.size}")
    return k * beam


def save_k_csv(path: str | Path, result: CalibrationResult, geom: ArrayGeometry, seed: int | None) -> None:
    snr = "none" if result.snr_db is None else f"{result.snr_db:.9g}"
    header = (f"# geometry={geom.kind} n_x={geom.n_x} n_y={geom.n_y} seed={seed} method={result.method} "
              f"snr_db={snr} snr_definition={SNR_DEFINITION}")
    lines = [header, "element_index,k_re,k_im"]
    lines += [f"{i},{v.real:.17g},{v.imag:.17g}" for i, v in enumerate(result.k)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_k_csv(path: str | Path) -> tuple[np.ndarray, dict[str, str]]:
    """Return the calibration diagonal and the provenance header fields."""
    text = Path(path).read_text().splitlines()
    meta: dict[str, str] = {}
    rows = []
    for line in text:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    key, val = tok.split("=", 1)
                    meta[key] = val
            continue
        if not line.strip() or line.startswith("element_index"):
            continue
        idx, re, im = line.split(",")
        rows.append((int(idx), complex(float(re), float(im))))
    rows.sort()
    if [i for i, _ in rows] != list(range(len(rows))):
        raise ValueError(f"{path}: element indices are not contiguous from 0")
    return np.array([v for _, v in rows]), meta
