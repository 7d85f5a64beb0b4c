"""Generic harmonic state-space model container.

An ``HssModel`` holds the quadruple (A, E, C, F) over stacked Fourier
coefficients, with E and F keyed per disturbance port.  The Laplace
variable is never stored: callers assemble s*I + j*Omega at evaluation
sites (transfer functions, eigenvalue problems).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, ShapeError
from .harmonic import (
    HARMONIC_MAJOR,
    GroupingLayout,
    HarmonicIndexSet,
    OmegaOperator,
    build_omega,
    toeplitz_from_fourier,
)


@dataclass(frozen=True)
class HssModel:
    index_set: HarmonicIndexSet
    a: np.ndarray
    e: Mapping[str, np.ndarray]
    c: np.ndarray
    f: Mapping[str, np.ndarray]
    state_names: tuple[str, ...]
    disturbance_layouts: Mapping[str, GroupingLayout] = field(default_factory=dict)
    output_layout: GroupingLayout | None = None
    #: generating LTP series {"a": {h: matrix}, ...}, retained only for models
    #: lifted directly from a time-domain quadruple (enables regridding)
    series: Mapping[str, Mapping[str, Mapping[int, np.ndarray]]] | None = field(
        default=None, compare=False
    )

    def __post_init__(self):
        object.__setattr__(self, "e", MappingProxyType(dict(self.e)))
        object.__setattr__(self, "f", MappingProxyType(dict(self.f)))
        object.__setattr__(
            self, "disturbance_layouts", MappingProxyType(dict(self.disturbance_layouts))
        )
        object.__setattr__(self, "state_names", tuple(self.state_names))
        n = self.state_dim
        if self.a.shape != (n, n):
            raise ShapeError(f"A has shape {self.a.shape}, state dim is {n}")
        if set(self.e) != set(self.f):
            raise ShapeError("E and F must share the same port names")
        ny = self.c.shape[0]
        if self.c.shape != (ny, n):
            raise ShapeError(f"C has shape {self.c.shape}, expected ({ny}, {n})")
        for port, mat in self.e.items():
            if mat.shape[0] != n:
                raise ShapeError(f"E[{port}] has {mat.shape[0]} rows, expected {n}")
            if self.f[port].shape != (ny, mat.shape[1]):
                raise ShapeError(
                    f"F[{port}] has shape {self.f[port].shape}, expected ({ny}, {mat.shape[1]})"
                )

    @property
    def state_channels(self) -> int:
        return len(self.state_names)

    @property
    def state_dim(self) -> int:
        return self.index_set.count * self.state_channels

    @property
    def output_dim(self) -> int:
        return self.c.shape[0]

    @property
    def ports(self) -> tuple[str, ...]:
        return tuple(self.e.keys())

    def port_dim(self, port: str) -> int:
        return self.e[port].shape[1]

    def omega(self) -> OmegaOperator:
        return build_omega(self.index_set, self.state_channels)

    def shifted_state_matrix(self) -> np.ndarray:
        """A - j*Omega, the matrix whose spectrum carries harmonic stability."""
        m = self.a.astype(complex, copy=True)
        diag = self.omega().diagonal
        m[np.diag_indices_from(m)] -= 1j * diag
        return m

    def state_labels(self) -> tuple[tuple[str, int], ...]:
        """(channel name, harmonic order) for every row of the stacked state."""
        return tuple(
            (name, int(h))
            for h in self.index_set.orders
            for name in self.state_names
        )

    def stacked(self, which: str, ports: tuple[str, ...] | None = None) -> np.ndarray:
        """Horizontal stack of E or F over the given ports (all ports by default)."""
        mats = self.e if which == "e" else self.f
        names = self.ports if ports is None else ports
        n_rows = self.state_dim if which == "e" else self.output_dim
        return (
            np.hstack([mats[p] for p in names])
            if names
            else np.zeros((n_rows, 0), dtype=complex)
        )


def lift_ltp(
    a_series: Mapping[int, np.ndarray],
    e_series: Mapping[str, Mapping[int, np.ndarray]],
    c_series: Mapping[int, np.ndarray],
    f_series: Mapping[str, Mapping[int, np.ndarray]],
    index_set: HarmonicIndexSet,
    state_names: tuple[str, ...],
) -> HssModel:
    """Toeplitz-lift a time-domain LTP quadruple onto the harmonic grid.

    The generating series are retained on the model, so the result can be
    re-gridded at a different truncation order.
    """
    a = toeplitz_from_fourier(a_series, index_set)
    e = {p: toeplitz_from_fourier(s, index_set).matrix for p, s in e_series.items()}
    c_op = toeplitz_from_fourier(c_series, index_set)
    f = {p: toeplitz_from_fourier(s, index_set).matrix for p, s in f_series.items()}
    if a.block_shape[0] != a.block_shape[1]:
        raise ShapeError("state matrix series must be square")
    if len(state_names) != a.block_shape[0]:
        raise ShapeError(
            f"{len(state_names)} state names for {a.block_shape[0]} state channels"
        )
    return HssModel(
        index_set=index_set,
        a=a.matrix,
        e=e,
        c=c_op.matrix,
        f=f,
        state_names=state_names,
        series={
            "a": {"": dict(a_series)},
            "e": {p: dict(s) for p, s in e_series.items()},
            "c": {"": dict(c_series)},
            "f": {p: dict(s) for p, s in f_series.items()},
        },
    )


def hss_from_lti(
    a: np.ndarray,
    e: Mapping[str, np.ndarray],
    c: np.ndarray,
    f: Mapping[str, np.ndarray],
    index_set: HarmonicIndexSet,
    state_names: tuple[str, ...] | None = None,
) -> HssModel:
    """Lift a constant (LTI) quadruple: every matrix becomes block-diagonal."""
    a = np.atleast_2d(np.asarray(a))
    names = state_names or tuple(f"x{i}" for i in range(a.shape[0]))
    return lift_ltp(
        {0: a},
        {p: {0: np.atleast_2d(np.asarray(m))} for p, m in e.items()},
        {0: np.atleast_2d(np.asarray(c))},
        {p: {0: np.atleast_2d(np.asarray(m))} for p, m in f.items()},
        index_set,
        names,
    )


def regrid_model(model: HssModel, hmax_new: int) -> HssModel:
    """Rebuild a series-backed model on a new harmonic grid.

    Only models that retain their generating LTP series (i.e. direct
    lifts) can be regridded; assembled systems are re-created from their
    scenario instead.
    """
    if hmax_new == model.index_set.hmax:
        return model
    if model.series is None:
        raise ConfigurationError(
            "model does not retain generating series; rebuild it from its source "
            "at the desired hmax instead"
        )
    new_set = HarmonicIndexSet(hmax_new, model.index_set.f1)

    def trim(series):
        kept = {h: m for h, m in series.items() if abs(h) <= hmax_new}
        if not kept:
            any_mat = next(iter(series.values()))
            kept = {0: np.zeros_like(np.atleast_2d(any_mat))}
        return kept

    return lift_ltp(
        trim(model.series["a"][""]),
        {p: trim(s) for p, s in model.series["e"].items()},
        trim(model.series["c"][""]),
        {p: trim(s) for p, s in model.series["f"].items()},
        new_set,
        model.state_names,
    )


def check_same_grid(models, what="models") -> HarmonicIndexSet:
    """All models must share (hmax, f1); returns the common index set."""
    sets = {m.index_set for m in models}
    if len(sets) != 1:
        raise ConfigurationError(f"{what} use different harmonic grids: {sets}")
    return next(iter(sets))


def state_interleave_indices(
    index_set: HarmonicIndexSet, channel_counts
) -> np.ndarray:
    """Permutation turning a subsystem-stacked state into the h-major layout.

    Stacking two lifted models block-diagonally leaves the state grouped
    per subsystem; every ``HssModel`` keeps its state h-major instead, so
    compositions re-interleave rows/columns with this index array.
    """
    from .harmonic import NODE_MAJOR, permutation_indices

    dims = tuple(int(c) for c in channel_counts if c > 0)
    if not dims:
        return np.zeros(0, dtype=int)
    layout = GroupingLayout(NODE_MAJOR, dims, index_set)
    return permutation_indices(layout, HARMONIC_MAJOR)


def harmonic_layout(index_set: HarmonicIndexSet, dims: tuple[int, ...]) -> GroupingLayout:
    return GroupingLayout(HARMONIC_MAJOR, dims, index_set)
