"""Fourier-series and block-Toeplitz machinery.

Time-periodic signals are stored as column stacks of complex Fourier
coefficients over the harmonic orders -hmax..+hmax (ascending, "h-major":
all channels of the most negative order come first).  A matrix-valued
Fourier series lifts to a dense block-Toeplitz operator whose (i, k)
block is the coefficient at order i - k; multiplication by that operator
realises the time-domain product as a spectral convolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, ShapeError

#: coefficients produced by exact constructions must match to this
CONSTRUCTION_TOL = 1e-14
#: sampled/DFT-based oracles are trusted to this accuracy
NUMERIC_TOL = 1e-9
#: absolute tolerance for the conjugate-symmetry (real signal) check
CONJ_SYM_TOL = 1e-12

HARMONIC_MAJOR = "harmonic-major"
NODE_MAJOR = "node-major"


@dataclass(frozen=True)
class HarmonicIndexSet:
    """Truncated set of harmonic orders {-hmax..+hmax} at fundamental f1 [Hz]."""

    hmax: int
    f1: float

    def __post_init__(self):
        if self.hmax < 0:
            raise ConfigurationError(f"hmax must be >= 0, got {self.hmax}")
        if not self.f1 > 0:
            raise ConfigurationError(f"f1 must be > 0, got {self.f1}")

    @property
    def count(self) -> int:
        return 2 * self.hmax + 1

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.hmax, self.hmax + 1)

    @property
    def omega1(self) -> float:
        """Fundamental angular frequency 2*pi*f1 [rad/s]."""
        return 2.0 * np.pi * self.f1

    def order_index(self, h: int) -> int:
        if abs(h) > self.hmax:
            raise ShapeError(f"order {h} outside +-{self.hmax}")
        return h + self.hmax

    def block_slice(self, h: int, dim: int) -> slice:
        i = self.order_index(h)
        return slice(i * dim, (i + 1) * dim)


def default_sample_count(index_set: HarmonicIndexSet) -> int:
    # 8x oversampling over the Nyquist requirement keeps aliasing of smooth
    # trajectories far below the numeric tolerances.
    return 8 * index_set.count


@dataclass(frozen=True)
class HarmonicSignal:
    """Column stack of Fourier coefficients of an n-channel periodic signal."""

    index_set: HarmonicIndexSet
    channels: int
    coeffs: np.ndarray
    real_valued: bool = False

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        object.__setattr__(self, "coeffs", coeffs)
        expected = self.index_set.count * self.channels
        if self.channels < 1:
            raise ShapeError("channels must be >= 1")
        if coeffs.shape != (expected,):
            raise ShapeError(
                f"coefficient vector has length {coeffs.shape[0]}, expected {expected}"
            )
        if self.real_valued:
            err = self._conjugate_symmetry_error()
            if err > CONJ_SYM_TOL:
                raise ShapeError(
                    f"signal flagged real-valued but X(-h) != conj(X(+h)); "
                    f"max deviation {err:.3e}"
                )

    def _conjugate_symmetry_error(self) -> float:
        stack = self.coeffs.reshape(self.index_set.count, self.channels)
        return float(np.max(np.abs(stack[::-1] - np.conj(stack))))

    def coeff(self, h: int) -> np.ndarray:
        """Coefficient vector (one entry per channel) at order h."""
        return self.coeffs[self.index_set.block_slice(h, self.channels)]

    def sample(self, n_samples: int | None = None) -> np.ndarray:
        """Reconstruct one fundamental period on a uniform grid, shape (N, channels)."""
        n = n_samples or default_sample_count(self.index_set)
        t = np.arange(n) / (n * self.index_set.f1)
        stack = self.coeffs.reshape(self.index_set.count, self.channels)
        phases = np.exp(
            2j * np.pi * self.index_set.f1 * np.outer(t, self.index_set.orders)
        )
        out = phases @ stack
        if self.real_valued:
            return out.real
        return out


def fourier_from_samples(samples: np.ndarray, index_set: HarmonicIndexSet) -> HarmonicSignal:
    """DFT of uniform samples over exactly one fundamental period.

    ``samples`` has shape (N,) or (N, channels); N must be at least twice
    the number of retained orders.  Real input yields a signal flagged
    conjugate-symmetric.
    """
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.ndim != 2:
        raise ShapeError(f"samples must be 1-D or 2-D, got shape {samples.shape}")
    n, channels = samples.shape
    if n < 2 * index_set.count:
        raise ShapeError(
            f"{n} samples insufficient for hmax={index_set.hmax}; "
            f"need at least {2 * index_set.count}"
        )
    real_input = not np.iscomplexobj(samples)
    spec = np.fft.fft(samples, axis=0) / n
    stack = np.empty((index_set.count, channels), dtype=complex)
    for h in index_set.orders:
        stack[index_set.order_index(h)] = spec[h % n]
    if real_input:
        # the FFT of real samples is conjugate-symmetric only up to rounding;
        # symmetrise so the real-signal invariant holds exactly
        stack = 0.5 * (stack + np.conj(stack[::-1]))
    return HarmonicSignal(index_set, channels, stack.reshape(-1), real_valued=real_input)


def series_from_samples(
    samples: np.ndarray, index_set: HarmonicIndexSet, order: int | None = None
) -> dict[int, np.ndarray]:
    """Entry-wise DFT of a matrix trajectory, shape (N, m, n) -> {h: (m, n)}.

    Coefficients are retained for |h| <= order (default hmax).
    """
    samples = np.asarray(samples)
    if samples.ndim != 3:
        raise ShapeError(f"matrix trajectory must have shape (N, m, n), got {samples.shape}")
    n = samples.shape[0]
    if n < 2 * index_set.count:
        raise ShapeError(f"{n} samples insufficient for hmax={index_set.hmax}")
    hc = index_set.hmax if order is None else order
    spec = np.fft.fft(samples, axis=0) / n
    return {int(h): spec[h % n] for h in range(-hc, hc + 1)}


def sample_series(
    series: Mapping[int, np.ndarray], index_set: HarmonicIndexSet, n_samples: int | None = None
) -> np.ndarray:
    """Evaluate a matrix-valued Fourier series on one period, shape (N, m, n)."""
    n = n_samples or default_sample_count(index_set)
    t = np.arange(n) / (n * index_set.f1)
    mats = {h: np.atleast_2d(np.asarray(a, dtype=complex)) for h, a in series.items()}
    if not mats:
        raise ShapeError("empty Fourier series")
    shape = next(iter(mats.values())).shape
    out = np.zeros((n,) + shape, dtype=complex)
    for h, a in mats.items():
        out += np.exp(2j * np.pi * index_set.f1 * h * t)[:, None, None] * a
    return out


@dataclass(frozen=True)
class ToeplitzOperator:
    """Dense block-Toeplitz lift of a matrix-valued Fourier series."""

    index_set: HarmonicIndexSet
    block_shape: tuple[int, int]
    matrix: np.ndarray
    series: Mapping[int, np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        m, n = self.block_shape
        expected = (self.index_set.count * m, self.index_set.count * n)
        if self.matrix.shape != expected:
            raise ShapeError(f"matrix shape {self.matrix.shape}, expected {expected}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def block(self, i: int, k: int) -> np.ndarray:
        m, n = self.block_shape
        return self.matrix[i * m : (i + 1) * m, k * n : (k + 1) * n]


def _normalize_series(series: Mapping[int, np.ndarray]) -> dict[int, np.ndarray]:
    out = {}
    shape = None
    for h, a in series.items():
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        if a.ndim != 2:
            raise ShapeError(f"coefficient at order {h} is not a matrix")
        if shape is None:
            shape = a.shape
        elif a.shape != shape:
            raise ShapeError(
                f"coefficient at order {h} has shape {a.shape}, others have {shape}"
            )
        out[int(h)] = a
    if shape is None:
        raise ShapeError("empty Fourier series")
    return out


def toeplitz_from_fourier(
    series: Mapping[int, np.ndarray], index_set: HarmonicIndexSet
) -> ToeplitzOperator:
    """Build the block-Toeplitz operator of a Fourier series.

    Block (i, k) of the result equals the series coefficient at order
    i - k; orders absent from the series give zero blocks.  Series orders
    beyond hmax are rejected: truncation is the caller's decision.
    """
    mats = _normalize_series(series)
    hc = max(abs(h) for h in mats)
    if hc > index_set.hmax:
        raise ShapeError(
            f"series contains order {hc} > hmax={index_set.hmax}; truncate explicitly"
        )
    m, n = next(iter(mats.values())).shape
    count = index_set.count
    out = np.zeros((count * m, count * n), dtype=complex)
    for h, a in mats.items():
        # all blocks on the h-th block diagonal reference the same coefficient
        for i in range(count):
            k = i - h
            if 0 <= k < count:
                out[i * m : (i + 1) * m, k * n : (k + 1) * n] = a
    return ToeplitzOperator(index_set, (m, n), out, series=mats)


def toeplitz_identity(index_set: HarmonicIndexSet, dim: int) -> ToeplitzOperator:
    return toeplitz_from_fourier({0: np.eye(dim)}, index_set)


def regrid_truncation(op: ToeplitzOperator, hmax_new: int) -> ToeplitzOperator:
    """Re-run the Toeplitz construction of ``op`` on a new harmonic grid.

    Requires the generating series (regridding is a reconstruction, not a
    submatrix crop).  Series orders beyond the new hmax are dropped.
    """
    if hmax_new == op.index_set.hmax:
        return op
    if op.series is None:
        raise ConfigurationError(
            "operator does not retain its generating series; cannot regrid"
        )
    new_set = HarmonicIndexSet(hmax_new, op.index_set.f1)
    trimmed = {h: a for h, a in op.series.items() if abs(h) <= hmax_new}
    if not trimmed:
        m, n = op.block_shape
        trimmed = {0: np.zeros((m, n))}
    return toeplitz_from_fourier(trimmed, new_set)


@dataclass(frozen=True)
class OmegaOperator:
    """Diagonal frequency-shift operator 2*pi*f1*diag_h(h), block_dim entries per order."""

    index_set: HarmonicIndexSet
    block_dim: int
    diagonal: np.ndarray

    def __post_init__(self):
        if self.block_dim < 1:
            raise ShapeError("block_dim must be >= 1")
        expected = self.index_set.count * self.block_dim
        if self.diagonal.shape != (expected,):
            raise ShapeError(f"diagonal length {self.diagonal.shape}, expected ({expected},)")

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)


def build_omega(index_set: HarmonicIndexSet, block_dim: int) -> OmegaOperator:
    diag = np.repeat(index_set.omega1 * index_set.orders.astype(float), block_dim)
    return OmegaOperator(index_set, block_dim, diag)


@dataclass(frozen=True)
class GroupingLayout:
    """Describes whether a stacked vector is grouped per harmonic or per node."""

    ordering: str
    node_dims: tuple[int, ...]
    index_set: HarmonicIndexSet

    def __post_init__(self):
        if self.ordering not in (HARMONIC_MAJOR, NODE_MAJOR):
            raise ConfigurationError(f"unknown ordering '{self.ordering}'")
        object.__setattr__(self, "node_dims", tuple(int(d) for d in self.node_dims))
        if any(d < 1 for d in self.node_dims):
            raise ShapeError("node dimensions must be positive")

    @property
    def total_dim(self) -> int:
        return self.index_set.count * sum(self.node_dims)

    def with_ordering(self, ordering: str) -> "GroupingLayout":
        return GroupingLayout(ordering, self.node_dims, self.index_set)


def permutation_indices(layout: GroupingLayout, target: str) -> np.ndarray:
    """Index array p such that v_target = v_source[p]."""
    if target not in (HARMONIC_MAJOR, NODE_MAJOR):
        raise ConfigurationError(f"unknown ordering '{target}'")
    n_total = sum(layout.node_dims)
    count = layout.index_set.count
    if layout.ordering == target:
        return np.arange(count * n_total)
    offsets = np.cumsum((0,) + layout.node_dims[:-1])
    # harmonic-major position of (node k, order index i, channel c)
    hm = np.empty(count * n_total, dtype=int)
    pos = 0
    for k, d in enumerate(layout.node_dims):
        for i in range(count):
            for c in range(d):
                hm[pos] = i * n_total + offsets[k] + c
                pos += 1
    if layout.ordering == HARMONIC_MAJOR:  # -> node-major
        return hm
    inv = np.empty_like(hm)
    inv[hm] = np.arange(hm.size)
    return inv


def permute_grouping(obj: np.ndarray, layout: GroupingLayout, target: str):
    """Reorder a stacked vector, or similarity-transform a square matrix.

    Returns ``(permuted, new_layout)``.  Applying the operation twice
    restores the original object bit-exactly.
    """
    obj = np.asarray(obj)
    idx = permutation_indices(layout, target)
    if obj.ndim == 1:
        if obj.shape[0] != idx.size:
            raise ShapeError(f"vector length {obj.shape[0]} != layout dim {idx.size}")
        return obj[idx], layout.with_ordering(target)
    if obj.ndim == 2:
        if obj.shape != (idx.size, idx.size):
            raise ShapeError(
                f"matrix shape {obj.shape} incompatible with layout dim {idx.size}"
            )
        return obj[np.ix_(idx, idx)], layout.with_ordering(target)
    raise ShapeError("only vectors and square matrices can be regrouped")
