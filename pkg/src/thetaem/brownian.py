"""Seeded Brownian increments with exact dyadic coarsening.

Every path has its own stateless stream: a Philox4x64 counter generator keyed
by ``(seed, path_id)``. Raw 64-bit words are mapped to uniforms on (0, 1) via
the top 53 bits plus one half ulp, then to normals by the inverse normal CDF.
No rejection step, so word k of a stream always becomes increment k.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtri

_HEADER = struct.Struct("<QddQQ")  # seed, T, delta, m, count


class GridError(ValueError):
    pass


def step_count(horizon: float, delta: float) -> int:
    """floor(T / delta), tolerant to the rounding of exact ratios like 1/2^-k."""
    ratio = horizon / delta
    n = round(ratio)
    return int(n) if abs(ratio - n) <= 1e-9 * max(1.0, ratio) else int(math.floor(ratio))


@dataclass(frozen=True)
class BrownianGrid:
    """Increments W(t_{k+1}) - W(t_k) on a uniform grid.

    ``increments`` has shape ``(M, m)`` for one path or ``(N, M, m)`` for a batch
    of paths ``0..N-1``.
    """

    seed: int
    horizon: float
    stepsize: float
    dim_noise: int
    increments: np.ndarray

    def __post_init__(self):
        self.increments.flags.writeable = False

    @property
    def steps(self) -> int:
        return self.increments.shape[-2]

    @property
    def batch_shape(self) -> tuple:
        return self.increments.shape[:-2]

    def terminal(self) -> np.ndarray:
        """W at the last grid point, by sequential summation."""
        return np.cumsum(self.increments, axis=-2)[..., -1, :] if self.steps else np.zeros(self.batch_shape + (self.dim_noise,))

    def take_paths(self, sl) -> "BrownianGrid":
        return BrownianGrid(self.seed, self.horizon, self.stepsize, self.dim_noise, self.increments[sl])


def _normals(seed: int, path_id: int, count: int) -> np.ndarray:
    key = (int(seed) & 0xFFFF_FFFF_FFFF_FFFF) | (int(path_id) << 64)
    raw = np.random.Philox(key=key).random_raw(count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def sample_grid(seed: int, horizon: float, delta: float, dim_noise: int = 1, n_paths: int | None = None) -> BrownianGrid:
    """Deterministic in (seed, horizon, delta, dim_noise); path i of a batch
    equals the single grid for path id i."""
    if not horizon > 0:
        raise GridError("horizon must be positive")
    if not 0 < delta <= horizon:
        raise GridError(f"invalid stepsize {delta!r}: need 0 < delta <= T = {horizon}")
    steps = step_count(horizon, delta)
    scale = math.sqrt(delta)
    ids = [0] if n_paths is None else range(n_paths)
    inc = np.stack([_normals(seed, i, steps * dim_noise).reshape(steps, dim_noise) for i in ids]) * scale
    if n_paths is None:
        inc = inc[0]
    return BrownianGrid(int(seed), float(horizon), float(delta), int(dim_noise), inc)


def coarsen(grid: BrownianGrid, factor: int) -> BrownianGrid:
    """Sum consecutive blocks of ``factor`` increments, left to right."""
    if factor < 1 or factor & (factor - 1):
        raise GridError(f"coarsening factor must be a power of two, got {factor}")
    if grid.steps % factor:
        raise GridError(f"{grid.steps} increments not divisible by factor {factor}")
    inc = grid.increments
    out = inc[..., 0::factor, :].copy()
    for j in range(1, factor):
        out += inc[..., j::factor, :]
    return BrownianGrid(grid.seed, grid.horizon, grid.stepsize * factor, grid.dim_noise, out)


def path_values(grid: BrownianGrid) -> np.ndarray:
    """W(t_0 = 0), W(t_1), ..., W(t_M) along the step axis."""
    inc = grid.increments
    zero = np.zeros(inc.shape[:-2] + (1, inc.shape[-1]))
    return np.concatenate([zero, np.cumsum(inc, axis=-2)], axis=-2)


def dump_grid(grid: BrownianGrid, path: str | Path) -> None:
    """Binary dump: little-endian header (seed, T, delta, m, count) then float64 payload."""
    if grid.increments.ndim != 2:
        raise GridError("only single-path grids can be dumped")
    payload = np.ascontiguousarray(grid.increments, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(grid.seed & 0xFFFF_FFFF_FFFF_FFFF, grid.horizon, grid.stepsize, grid.dim_noise, grid.steps))
        fh.write(payload.tobytes())


def load_grid(path: str | Path) -> BrownianGrid:
    data = Path(path).read_bytes()
    seed, horizon, delta, m, count = _HEADER.unpack_from(data)
    inc = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if inc.size != count * m:
        raise GridError(f"payload holds {inc.size} values, header promises {count * m}")
    return BrownianGrid(seed, horizon, delta, m, inc.reshape(count, m).astype(np.float64))
