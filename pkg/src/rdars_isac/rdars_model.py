"""The dual-mode surface: 2-bit phase codes, element modes, beam synthesis."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .geometry import ArrayGeometry, _check_unit

PHASE_LEVELS = 4
NUM_ELEMENTS = 256
LEVEL_STEP = 2 * math.pi / PHASE_LEVELS
GAIN_RTOL = 1e-9


def code_phase(code) -> float:
    """Reflection phase in radians for a 2-bit code (0, pi/2, pi, 3pi/2)."""
    return code * LEVEL_STEP


@dataclass(frozen=True)
class Reflection:
    code: int

    def __post_init__(self):
        if not 0 <= self.code < PHASE_LEVELS:
            raise ValueError(f"phase code out of range: {self.code}")

    @property
    def phase(self) -> float:
        return code_phase(self.code)


@dataclass(frozen=True)
class Connected:
    pass


ElementMode = Union[Reflection, Connected]
CONNECTED = Connected()


class RdarsConfiguration:
    """Immutable per-element state of the surface.

    ``codes`` holds one 2-bit code per element; elements listed in
    ``connected`` are in connected mode and their code is stored as 0.
    """

    __slots__ = ("_codes", "_connected", "_hash")

    def __init__(self, codes: Iterable[int], connected: Iterable[int] = ()):
        arr = np.array(list(codes) if not isinstance(codes, np.ndarray) else codes, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("codes must be one-dimensional")
        if np.any(arr >= PHASE_LEVELS):
            raise ValueError("phase codes must be in {0,1,2,3}")
        conn = frozenset(int(i) for i in connected)
        _check_indices(conn, arr.size)
        if conn:
            arr[list(conn)] = 0
        arr.setflags(write=False)
        self._codes = arr
        self._connected = conn
        self._hash = None

    @classmethod
    def from_modes(cls, modes: Iterable[ElementMode]) -> "RdarsConfiguration":
        codes, conn = [], []
        for n, m in enumerate(modes):
            if isinstance(m, Connected):
                conn.append(n)
                codes.append(0)
            else:
                codes.append(m.code)
        return cls(codes, conn)

    @classmethod
    def uniform(cls, code: int = 0, connected: Iterable[int] = (), size: int = NUM_ELEMENTS):
        return cls(np.full(size, code, dtype=np.uint8), connected)

    @property
    def codes(self) -> np.ndarray:
        return self._codes

    @property
    def size(self) -> int:
        return self._codes.size

    @property
    def connected_set(self) -> frozenset[int]:
        return self._connected

    @property
    def reflect_set(self) -> frozenset[int]:
        return frozenset(range(self.size)) - self._connected

    @property
    def a(self) -> int:
        return len(self._connected)

    @property
    def reflect_mask(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        if self._connected:
            mask[list(self._connected)] = False
        return mask

    @property
    def modes(self) -> list[ElementMode]:
        return [CONNECTED if n in self._connected else Reflection(int(c))
                for n, c in enumerate(self._codes)]

    def with_connected(self, connected: Iterable[int]) -> "RdarsConfiguration":
        return RdarsConfiguration(self._codes.copy(), connected)

    def __eq__(self, other):
        if not isinstance(other, RdarsConfiguration):
            return NotImplemented
        return self._connected == other._connected and np.array_equal(self._codes, other._codes)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._codes.tobytes(), self._connected))
        return self._hash

    def __repr__(self):
        return f"RdarsConfiguration(a={self.a}, codes={self._codes.tobytes().hex()[:16]}...)"


def _check_indices(indices, size):
    bad = [i for i in indices if not 0 <= i < size]
    if bad:
        raise ValueError(f"element indices out of range [0, {size}): {sorted(bad)}")


def quantize_phases(phi, levels: int = PHASE_LEVELS) -> np.ndarray:
    """Nearest-level code for each phase; ties go to the lower code."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("phase must be finite")
    step = 2 * math.pi / levels
    x = np.mod(phi, 2 * math.pi) / step
    lo = np.floor(x)
    frac = x - lo
    lo = lo.astype(np.int64) % levels
    hi = (lo + 1) % levels
    code = np.where(frac > 0.5, hi, lo)
    tie = frac == 0.5
    code = np.where(tie, np.minimum(lo, hi), code)
    return code.astype(np.uint8)


def quantize_phase(phi: float, levels: int = PHASE_LEVELS) -> int:
    if levels != PHASE_LEVELS:
        raise ValueError("only 2-bit (4-level) phase shifters are modelled")
    return int(quantize_phases(phi, levels))


def beam_codes(ideal_phases, offset_search: bool = True, active=None) -> tuple[np.ndarray, float]:
    """2-bit codes that maximise the coherent gain of ``exp(j(psi - ideal))``.

    Rounding ``ideal_phases`` element by element is not optimal in general.
    The optimum rounds ``ideal_phases + c`` for some common offset ``c``; only
    one rounding pattern exists between consecutive decision boundaries, so
    the search visits one offset per boundary in [0, pi/2). Gains within
    ``GAIN_RTOL`` of the best count as ties: plain rounding (``c = 0``) wins a
    tie, otherwise the smallest offset does.

    ``active`` is an optional boolean mask of the elements that reflect;
    only those contribute to the gain being maximised.

    Returns:
        (codes, offset) with ``codes == quantize_phases(ideal_phases + offset)``.
    """
    ideal = np.asarray(ideal_phases, dtype=float)
    codes = quantize_phases(ideal)
    if not offset_search or ideal.size < 2:
        return codes, 0.0
    w = np.ones(ideal.size) if active is None else np.asarray(active, dtype=float)
    base_gain = abs((w * np.exp(1j * (code_phase(codes.astype(float)) - ideal))).sum())

    bounds = np.sort(np.mod(LEVEL_STEP / 2 - ideal, LEVEL_STEP))
    gaps = np.diff(np.append(bounds, bounds[0] + LEVEL_STEP))
    offsets = (bounds + gaps / 2)[gaps > 1e-12]
    order = np.argsort(np.mod(offsets, LEVEL_STEP))
    offsets = np.mod(offsets, LEVEL_STEP)[order]
    cand = quantize_phases(ideal[None, :] + offsets[:, None])
    gains = np.abs((w * np.exp(1j * (code_phase(cand.astype(float)) - ideal[None, :]))).sum(axis=1))
    top = gains.max()
    if base_gain >= top * (1 - GAIN_RTOL):
        return codes, 0.0
    k = int(np.flatnonzero(gains >= top * (1 - GAIN_RTOL))[0])
    return cand[k], float(offsets[k])


def ideal_continuous_phases(ue_dir, bs_dir, geometry: ArrayGeometry, lam: float) -> np.ndarray:
    """Unquantised conjugate phases -(theta_in + theta_out) per element."""
    u = _check_unit(ue_dir, "ue_dir")
    b = _check_unit(bs_dir, "bs_dir")
    if not lam > 0:
        raise ValueError("wavelength must be positive")
    return -(2 * math.pi / lam) * (geometry.element_positions @ (u + b))


def conjugate_beam_config(ue_dir, bs_dir, connected_set, geometry: ArrayGeometry,
                          lam: float, offset_search: bool = True) -> RdarsConfiguration:
    """Quantised reflection beam steering energy from ``ue_dir`` toward ``bs_dir``.

    Elements in ``connected_set`` are switched to connected mode.
    """
    connected = frozenset(int(i) for i in connected_set)
    _check_indices(connected, geometry.size)
    active = np.ones(geometry.size, dtype=bool)
    active[list(connected)] = False
    ideal = ideal_continuous_phases(ue_dir, bs_dir, geometry, lam)
    codes, _ = beam_codes(ideal, offset_search, active)
    return RdarsConfiguration(codes, connected)


def conjugate_beam_codes(ideal: np.ndarray, offset_search: bool = True, active=None) -> np.ndarray:
    """Row-wise :func:`beam_codes` over an (M, N) matrix of ideal phases."""
    return np.stack([beam_codes(row, offset_search, active)[0] for row in np.atleast_2d(ideal)])


def scrambled_config(connected_set, size: int = NUM_ELEMENTS, seed: int = 0x5EED) -> RdarsConfiguration:
    """Pseudo-random codes; the coherent reflected beam collapses."""
    rng = np.random.default_rng(seed)
    return RdarsConfiguration(rng.integers(0, PHASE_LEVELS, size, dtype=np.uint8), connected_set)
