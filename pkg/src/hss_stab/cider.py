"""Harmonic state-space model of a single converter-interfaced resource.

A resource is power hardware plus control software, interconnected
through coordinate transforms.  The internal closed loop is formed by
the generic loop-closing operation; the grid response then combines the
internal response with the linearised reference calculation and the
external transforms into the grid-facing quadruple with disturbance
ports gamma (grid), sigma (setpoint) and o (operating-point offset).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .assembly import close_loop
from .errors import ConfigurationError, ShapeError, WellPosednessError
from .harmonic import (
    HarmonicIndexSet,
    NODE_MAJOR,
    GroupingLayout,
    ToeplitzOperator,
    default_sample_count,
    sample_series,
    series_from_samples,
    toeplitz_from_fourier,
)
from .model import HssModel, state_interleave_indices
from .references import (
    OperatingPoint,
    ReferencePlugin,
    build_reference_block,
    linearize_reference,
    make_operating_point,
)

GRID_FORMING = "grid-forming"
GRID_FOLLOWING = "grid-following"


@dataclass(frozen=True)
class LtpBlock:
    """One LTP subsystem given by matrix-valued Fourier series A, B, C, D."""

    name: str
    a: Mapping[int, np.ndarray]
    b: Mapping[int, np.ndarray]
    c: Mapping[int, np.ndarray]
    d: Mapping[int, np.ndarray]
    state_names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", _series(self.a))
        object.__setattr__(self, "b", _series(self.b))
        object.__setattr__(self, "c", _series(self.c))
        object.__setattr__(self, "d", _series(self.d))
        nx, nx2 = _series_shape(self.a)
        nu = _series_shape(self.b)[1]
        ny = _series_shape(self.c)[0]
        if nx != nx2:
            raise ShapeError(f"block '{self.name}': state matrix is not square")
        if _series_shape(self.b)[0] != nx:
            raise ShapeError(f"block '{self.name}': B rows != state dim")
        if _series_shape(self.c)[1] != nx:
            raise ShapeError(f"block '{self.name}': C cols != state dim")
        if _series_shape(self.d) != (ny, nu):
            raise ShapeError(f"block '{self.name}': D shape != (outputs, inputs)")
        if self.state_names is not None and len(self.state_names) != nx:
            raise ShapeError(f"block '{self.name}': {len(self.state_names)} names for {nx} states")

    @property
    def n_states(self) -> int:
        return _series_shape(self.a)[0]

    @property
    def n_inputs(self) -> int:
        return _series_shape(self.b)[1]

    @property
    def n_outputs(self) -> int:
        return _series_shape(self.c)[0]

    def resolved_state_names(self) -> tuple[str, ...]:
        if self.state_names is not None:
            return tuple(self.state_names)
        return tuple(f"{self.name}.x{i}" for i in range(self.n_states))


def _series(series) -> dict[int, np.ndarray]:
    out = {int(h): np.atleast_2d(np.asarray(m, dtype=complex)) for h, m in series.items()}
    if not out:
        raise ShapeError("empty coefficient series")
    shapes = {m.shape for m in out.values()}
    if len(shapes) != 1:
        raise ShapeError(f"inconsistent coefficient shapes {shapes}")
    return out


def _series_shape(series) -> tuple[int, int]:
    return next(iter(series.values())).shape


def lti_block(name, a, b, c, d, state_names=None) -> LtpBlock:
    """Constant-coefficient block (pure DC series)."""
    return LtpBlock(
        name,
        {0: np.atleast_2d(a)},
        {0: np.atleast_2d(b)},
        {0: np.atleast_2d(c)},
        {0: np.atleast_2d(d)},
        state_names,
    )


def stack_blocks(blocks: Sequence[LtpBlock], group: str) -> LtpBlock:
    """Parallel (block-diagonal) composition; inputs and outputs concatenate."""
    if not blocks:
        return lti_block(group, np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 0)), ())
    if len(blocks) == 1:
        return blocks[0]

    def stacked(which: str) -> dict[int, np.ndarray]:
        orders = sorted({h for blk in blocks for h in getattr(blk, which)})
        rows = {"a": "n_states", "b": "n_states", "c": "n_outputs", "d": "n_outputs"}[which]
        cols = {"a": "n_states", "b": "n_inputs", "c": "n_states", "d": "n_inputs"}[which]
        out = {}
        for h in orders:
            mats = []
            for blk in blocks:
                shape = (getattr(blk, rows), getattr(blk, cols))
                mats.append(getattr(blk, which).get(h, np.zeros(shape, dtype=complex)))
            out[h] = _block_diag(mats)
        return out

    names = tuple(n for blk in blocks for n in blk.resolved_state_names())
    return LtpBlock(group, stacked("a"), stacked("b"), stacked("c"), stacked("d"), names)


def _block_diag(mats) -> np.ndarray:
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols), dtype=complex)
    r = c = 0
    for m in mats:
        out[r : r + m.shape[0], c : c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


@dataclass(frozen=True)
class CtlInput:
    """Source of one control-software input channel.

    kind 'error' receives reference minus measurement, 'measurement' the
    transformed measurement alone, 'reference' the reference alone.
    """

    kind: str
    meas_index: int | None = None
    ref_index: int | None = None

    def __post_init__(self):
        if self.kind not in ("error", "measurement", "reference"):
            raise ConfigurationError(f"unknown control-input kind '{self.kind}'")
        if self.kind in ("error", "measurement") and self.meas_index is None:
            raise ConfigurationError(f"'{self.kind}' input needs a measurement index")
        if self.kind in ("error", "reference") and self.ref_index is None:
            raise ConfigurationError(f"'{self.kind}' input needs a reference index")


@dataclass(frozen=True)
class InternalRouting:
    """Explicit wiring between hardware, control and the transforms.

    Hardware input channels split into grid-side disturbances and
    actuation channels driven (in order) by the transformed control
    output.  ``ctl_measured_outputs`` lists the hardware outputs entering
    the measurement transform, and ``ctl_inputs`` declares the source of
    every control input channel.
    """

    hw_grid_inputs: tuple[int, ...]
    hw_actuation_inputs: tuple[int, ...]
    ctl_measured_outputs: tuple[int, ...]
    ctl_inputs: tuple[CtlInput, ...]

    @property
    def n_ref(self) -> int:
        refs = [c.ref_index for c in self.ctl_inputs if c.ref_index is not None]
        return max(refs) + 1 if refs else 0

    def validate(self, hardware: LtpBlock, control: LtpBlock, n_meas: int):
        declared = sorted(self.hw_grid_inputs + self.hw_actuation_inputs)
        if declared != list(range(hardware.n_inputs)):
            raise ConfigurationError(
                f"hardware inputs {declared} must partition 0..{hardware.n_inputs - 1}"
            )
        if len(self.ctl_inputs) != control.n_inputs:
            raise ConfigurationError(
                f"{len(self.ctl_inputs)} control-input sources declared for "
                f"{control.n_inputs} control inputs"
            )
        for k in self.ctl_measured_outputs:
            if not 0 <= k < hardware.n_outputs:
                raise ConfigurationError(f"measured hardware output {k} out of range")
        refs = sorted({c.ref_index for c in self.ctl_inputs if c.ref_index is not None})
        if refs != list(range(len(refs))):
            raise ConfigurationError(f"reference indices {refs} must be contiguous from 0")
        for c in self.ctl_inputs:
            if c.meas_index is not None and not 0 <= c.meas_index < n_meas:
                raise ConfigurationError(
                    f"measurement index {c.meas_index} outside transformed "
                    f"measurement vector of dim {n_meas}"
                )


def _selector(indices, width) -> np.ndarray:
    out = np.zeros((width, len(indices)))
    for col, idx in enumerate(indices):
        out[idx, col] = 1.0
    return out


@dataclass(frozen=True)
class InternalResponse:
    """Closed loop of hardware and control: ports 'pi' (grid side) and 'kappa'."""

    model: HssModel
    ny_hw: int  # hardware output channels per harmonic
    n_ref: int


def assemble_internal_response(
    hardware: Sequence[LtpBlock],
    control: Sequence[LtpBlock],
    routing: InternalRouting,
    ctl_to_hw: Mapping[int, np.ndarray],
    hw_to_ctl: Mapping[int, np.ndarray],
    index_set: HarmonicIndexSet,
    name: str = "cider",
) -> InternalResponse:
    """Close the hardware/control loop through the declared routing.

    The result is the internal quadruple over the stacked state
    col(x_hw, x_ctl) with disturbance columns partitioned into the
    grid-side ('pi') and reference ('kappa') groups.
    """
    hw = stack_blocks(tuple(hardware), "hw")
    ctl = stack_blocks(tuple(control), "ctl")
    t_act = toeplitz_from_fourier(ctl_to_hw, index_set)
    t_meas = toeplitz_from_fourier(hw_to_ctl, index_set)
    n_act_t, ny_c_t = t_act.block_shape
    n_meas, n_sel_t = t_meas.block_shape
    routing.validate(hw, ctl, n_meas)
    if ny_c_t != ctl.n_outputs:
        raise ShapeError(
            f"{name}: actuation transform expects {ny_c_t} control outputs, "
            f"control provides {ctl.n_outputs}"
        )
    if n_act_t != len(routing.hw_actuation_inputs):
        raise ShapeError(
            f"{name}: actuation transform provides {n_act_t} channels for "
            f"{len(routing.hw_actuation_inputs)} actuation inputs"
        )
    if n_sel_t != len(routing.ctl_measured_outputs):
        raise ShapeError(
            f"{name}: measurement transform expects {n_sel_t} signals, "
            f"{len(routing.ctl_measured_outputs)} hardware outputs selected"
        )

    count = index_set.count
    lift = lambda mat: np.kron(np.eye(count), mat)  # noqa: E731

    b_hw = toeplitz_from_fourier(hw.b, index_set).matrix if hw.n_inputs else np.zeros(
        (count * hw.n_states, 0)
    )
    d_hw = toeplitz_from_fourier(hw.d, index_set).matrix if hw.n_inputs else np.zeros(
        (count * hw.n_outputs, 0)
    )
    b_ctl = toeplitz_from_fourier(ctl.b, index_set).matrix if ctl.n_inputs else np.zeros(
        (count * ctl.n_states, 0)
    )
    d_ctl = toeplitz_from_fourier(ctl.d, index_set).matrix if ctl.n_inputs else np.zeros(
        (count * ctl.n_outputs, 0)
    )

    p_grid = lift(_selector(routing.hw_grid_inputs, hw.n_inputs))
    p_act = lift(_selector(routing.hw_actuation_inputs, hw.n_inputs))
    s_ref = np.zeros((ctl.n_inputs, routing.n_ref))
    s_meas = np.zeros((ctl.n_inputs, n_meas))
    for ch, src in enumerate(routing.ctl_inputs):
        if src.kind == "error":
            s_ref[ch, src.ref_index] = 1.0
            s_meas[ch, src.meas_index] = -1.0
        elif src.kind == "measurement":
            s_meas[ch, src.meas_index] = 1.0
        else:
            s_ref[ch, src.ref_index] = 1.0
    s_ref = lift(s_ref)
    s_meas = lift(s_meas)
    s_out = lift(_selector(routing.ctl_measured_outputs, hw.n_outputs).T)

    nx_h, nx_c = count * hw.n_states, count * ctl.n_states
    ny_h, ny_c = count * hw.n_outputs, count * ctl.n_outputs
    n_act, n_ms = count * n_act_t, count * n_meas

    a_open = _block_diag(
        [
            toeplitz_from_fourier(hw.a, index_set).matrix
            if hw.n_states
            else np.zeros((0, 0)),
            toeplitz_from_fourier(ctl.a, index_set).matrix
            if ctl.n_states
            else np.zeros((0, 0)),
        ]
    )
    c_open = _block_diag(
        [
            toeplitz_from_fourier(hw.c, index_set).matrix
            if hw.n_states * hw.n_outputs
            else np.zeros((ny_h, nx_h)),
            toeplitz_from_fourier(ctl.c, index_set).matrix
            if ctl.n_states * ctl.n_outputs
            else np.zeros((ny_c, nx_c)),
        ]
    )
    e_loop = np.zeros((nx_h + nx_c, n_act + n_ms), dtype=complex)
    e_loop[:nx_h, :n_act] = b_hw @ p_act
    e_loop[nx_h:, n_act:] = b_ctl @ s_meas
    f_loop = np.zeros((ny_h + ny_c, n_act + n_ms), dtype=complex)
    f_loop[:ny_h, :n_act] = d_hw @ p_act
    f_loop[ny_h:, n_act:] = d_ctl @ s_meas

    e_pi = np.vstack([b_hw @ p_grid, np.zeros((nx_c, count * len(routing.hw_grid_inputs)))])
    f_pi = np.vstack([d_hw @ p_grid, np.zeros((ny_c, count * len(routing.hw_grid_inputs)))])
    e_kappa = np.vstack([np.zeros((nx_h, count * routing.n_ref)), b_ctl @ s_ref])
    f_kappa = np.vstack([np.zeros((ny_h, count * routing.n_ref)), d_ctl @ s_ref])

    j_int = np.zeros((n_act + n_ms, ny_h + ny_c), dtype=complex)
    j_int[:n_act, ny_h:] = t_act.matrix
    j_int[n_act:, :ny_h] = t_meas.matrix @ s_out

    # re-interleave col(x_hw, x_ctl) into the h-major state layout
    idx = state_interleave_indices(index_set, (hw.n_states, ctl.n_states))
    open_model = HssModel(
        index_set=index_set,
        a=a_open[np.ix_(idx, idx)].astype(complex),
        e={
            "loop": e_loop[idx, :],
            "pi": e_pi[idx, :].astype(complex),
            "kappa": e_kappa[idx, :].astype(complex),
        },
        c=c_open[:, idx].astype(complex),
        f={"loop": f_loop, "pi": f_pi.astype(complex), "kappa": f_kappa.astype(complex)},
        state_names=hw.resolved_state_names() + ctl.resolved_state_names(),
    )
    try:
        closed = close_loop(open_model, j_int, loop_port="loop")
    except WellPosednessError as exc:
        raise WellPosednessError(
            f"{name}: internal actuation/measurement loop is ill-posed "
            f"(feedthrough chain hardware D -> measurement -> control D -> actuation): {exc}"
        ) from exc
    return InternalResponse(closed.model, hw.n_outputs, routing.n_ref)


def pinv_series(
    series: Mapping[int, np.ndarray], index_set: HarmonicIndexSet
) -> dict[int, np.ndarray]:
    """Time-pointwise inverse of a square matrix series, refit as a series.

    Only defined for series that are square and invertible at every
    sample; non-square output transforms need a user-supplied inverse.
    """
    shape = _series_shape(_series(series))
    if shape[0] != shape[1]:
        raise ConfigurationError(
            f"output transform with block shape {shape} has no default "
            f"pseudo-inverse; supply one explicitly"
        )
    samples = sample_series(series, index_set, default_sample_count(index_set))
    try:
        inv = np.linalg.inv(samples)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(
            "output transform is singular at some instant; supply its "
            "pseudo-inverse explicitly"
        ) from exc
    return series_from_samples(inv, index_set)


@dataclass(frozen=True)
class CiderTransforms:
    """External and internal coordinate transforms as generating series."""

    grid_to_hw: Mapping[int, np.ndarray]
    hw_to_ctl: Mapping[int, np.ndarray]
    ctl_to_hw: Mapping[int, np.ndarray]
    grid_out_to_hw_out: Mapping[int, np.ndarray]
    hw_out_to_grid_out: Mapping[int, np.ndarray] | None = None

    def output_map(self, index_set: HarmonicIndexSet) -> ToeplitzOperator:
        """Lifted operator sending hardware outputs to the grid port."""
        if self.hw_out_to_grid_out is not None:
            return toeplitz_from_fourier(self.hw_out_to_grid_out, index_set)
        return toeplitz_from_fourier(
            pinv_series(self.grid_out_to_hw_out, index_set), index_set
        )


@dataclass(frozen=True)
class CiderHss:
    """Grid response of one resource: ports gamma, sigma, o."""

    node_id: str
    kind: str
    model: HssModel
    operating_point: OperatingPoint | None


def assemble_cider_hss(
    internal: InternalResponse,
    plugin: ReferencePlugin,
    transforms: CiderTransforms,
    operating_point: OperatingPoint,
    index_set: HarmonicIndexSet,
    node_id: str,
    kind: str,
) -> CiderHss:
    """Combine internal response, reference small-signal model and transforms."""
    if kind not in (GRID_FORMING, GRID_FOLLOWING):
        raise ConfigurationError(f"unknown resource kind '{kind}'")
    t_pg = toeplitz_from_fourier(transforms.grid_to_hw, index_set)
    t_kp = toeplitz_from_fourier(transforms.hw_to_ctl, index_set)
    out_map = transforms.output_map(index_set)

    d_pi = internal.model.port_dim("pi") // index_set.count
    if t_pg.block_shape[0] != d_pi:
        raise ShapeError(
            f"{node_id}: grid-side transform yields {t_pg.block_shape[0]} channels, "
            f"hardware exposes {d_pi} grid inputs"
        )
    if t_kp.block_shape[1] != d_pi:
        raise ShapeError(
            f"{node_id}: control-frame transform expects {t_kp.block_shape[1]} "
            f"channels, grid-side disturbance has {d_pi}"
        )
    if out_map.block_shape[1] != internal.ny_hw:
        raise ShapeError(
            f"{node_id}: output transform expects {out_map.block_shape[1]} hardware "
            f"outputs, internal response provides {internal.ny_hw}"
        )

    r_rho, r_sigma = linearize_reference(plugin, operating_point, index_set)
    r_o, w_o = build_reference_block(r_rho, r_sigma, t_kp, operating_point)

    count = index_set.count
    e_pi = internal.model.e["pi"]
    e_kappa = internal.model.e["kappa"]
    f_pi = internal.model.f["pi"]
    f_kappa = internal.model.f["kappa"]

    ref_path = r_rho.matrix @ t_kp.matrix @ t_pg.matrix
    e_gamma = e_pi @ t_pg.matrix + e_kappa @ ref_path
    e_sigma = e_kappa @ r_sigma.matrix
    e_o = e_kappa @ r_o

    ny_hw_full = count * internal.ny_hw
    sel = np.zeros((ny_hw_full, internal.model.output_dim))
    sel[:, :ny_hw_full] = np.eye(ny_hw_full)
    pick = out_map.matrix @ sel

    f_gamma = pick @ (f_pi @ t_pg.matrix + f_kappa @ ref_path)
    f_sigma = pick @ (f_kappa @ r_sigma.matrix)
    f_o = pick @ (f_kappa @ r_o)
    c_gamma = pick @ internal.model.c

    d_gamma_in = t_pg.block_shape[1]
    d_gamma_out = out_map.block_shape[0]
    model = HssModel(
        index_set=index_set,
        a=internal.model.a,
        e={"gamma": e_gamma, "sigma": e_sigma, "o": e_o},
        c=c_gamma,
        f={"gamma": f_gamma, "sigma": f_sigma, "o": f_o},
        state_names=tuple(f"{node_id}.{n}" for n in internal.model.state_names),
        disturbance_layouts={
            "gamma": GroupingLayout(NODE_MAJOR, (d_gamma_in,), index_set)
        },
        output_layout=GroupingLayout(NODE_MAJOR, (d_gamma_out,), index_set),
    )
    return CiderHss(node_id, kind, model, operating_point)


def make_zero_injection(
    index_set: HarmonicIndexSet, node_id: str, port_dim: int = 3
) -> CiderHss:
    """Stateless resource injecting nothing; used for pure junction nodes."""
    count = index_set.count
    n = count * port_dim
    model = HssModel(
        index_set=index_set,
        a=np.zeros((0, 0), dtype=complex),
        e={
            "gamma": np.zeros((0, n), dtype=complex),
            "sigma": np.zeros((0, 0), dtype=complex),
            "o": np.zeros((0, 0), dtype=complex),
        },
        c=np.zeros((n, 0), dtype=complex),
        f={
            "gamma": np.zeros((n, n), dtype=complex),
            "sigma": np.zeros((n, 0), dtype=complex),
            "o": np.zeros((n, 0), dtype=complex),
        },
        state_names=(),
        disturbance_layouts={"gamma": GroupingLayout(NODE_MAJOR, (port_dim,), index_set)},
        output_layout=GroupingLayout(NODE_MAJOR, (port_dim,), index_set),
    )
    return CiderHss(node_id, GRID_FOLLOWING, model, None)


def park_series(theta0: float = 0.0) -> dict[int, np.ndarray]:
    """Three-phase to rotating-frame transform (2x3), amplitude-invariant.

    Entries are pure fundamental-frequency sinusoids, so the lifted
    operator couples only adjacent harmonics.
    """
    phases = theta0 - np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
    plus = np.exp(1j * phases)
    a_plus = (1.0 / 3.0) * np.vstack([plus, 1j * plus])
    return {1: a_plus, -1: np.conj(a_plus)}


def inverse_park_series(theta0: float = 0.0) -> dict[int, np.ndarray]:
    """Rotating-frame to three-phase transform (3x2); left inverse of park."""
    phases = theta0 - np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
    plus = np.exp(1j * phases)
    a_plus = 0.5 * np.column_stack([plus, 1j * plus])
    return {1: a_plus, -1: np.conj(a_plus)}


def identity_series(dim: int) -> dict[int, np.ndarray]:
    return {0: np.eye(dim)}
