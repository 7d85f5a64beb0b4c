"""Scenario-to-model assembly: resources, grid and the closed loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (
    ClosedLoopSystem,
    InterconnectionMatrix,
    OpenLoopSystem,
    ResourceBlock,
    build_interconnection,
    build_open_loop,
    close_loop,
    stack_resources,
)
from .cider import CiderHss, assemble_cider_hss, assemble_internal_response, make_zero_injection
from .errors import ConfigurationError
from .grid import build_grid_state_space, lift_grid_to_hss
from .harmonic import HarmonicIndexSet, HarmonicSignal, toeplitz_from_fourier
from .model import HssModel
from .references import make_operating_point
from .scenario import Scenario
from .templates import CiderConfig


def signal_from_harmonics(
    harmonics, channels: int, index_set: HarmonicIndexSet
) -> HarmonicSignal:
    """Zero-padded signal from a sparse {order: channel vector} mapping."""
    stack = np.zeros((index_set.count, channels), dtype=complex)
    for h, vec in harmonics.items():
        if abs(int(h)) > index_set.hmax:
            continue  # orders beyond the grid are simply not representable
        stack[index_set.order_index(int(h))] = vec
    return HarmonicSignal(index_set, channels, stack.reshape(-1))


def assemble_cider(config: CiderConfig, index_set: HarmonicIndexSet) -> CiderHss:
    """Build the grid response of one configured resource."""
    internal = assemble_internal_response(
        config.hardware,
        config.control,
        config.routing,
        config.transforms.ctl_to_hw,
        config.transforms.hw_to_ctl,
        index_set,
        name=config.node_id,
    )
    ctl_frame_op = toeplitz_from_fourier(config.transforms.hw_to_ctl, index_set)
    w_pi = signal_from_harmonics(config.w_pi, config.w_pi_channels, index_set)
    w_sigma = signal_from_harmonics(config.setpoint, config.setpoint_channels, index_set)
    op = make_operating_point(config.plugin, ctl_frame_op, w_pi, w_sigma, index_set)
    return assemble_cider_hss(
        internal,
        config.plugin,
        config.transforms,
        op,
        index_set,
        config.node_id,
        config.kind,
    )


@dataclass(frozen=True)
class SystemModel:
    """Assembled analysis target of a scenario.

    ``model`` is the closed-loop system, or the bare grid model for
    scenarios without resources.
    """

    scenario: Scenario
    index_set: HarmonicIndexSet
    model: HssModel
    grid_model: HssModel
    ciders: tuple[CiderHss, ...]
    resources: ResourceBlock | None
    open_loop: OpenLoopSystem | None
    interconnection: InterconnectionMatrix | None
    closed: ClosedLoopSystem | None

    @property
    def grid_only(self) -> bool:
        return self.closed is None


def assemble_system(scenario: Scenario, state_only: bool = False) -> SystemModel:
    """Run the full assembly pipeline for a scenario.

    Resources are ordered voltage-forming first (matching the grid's node
    ordering); following nodes without a declared resource receive a
    zero-injection placeholder so the interconnection stays square.
    ``state_only`` propagates to the loop closure when only the spectrum
    of the result is needed.
    """
    index_set = HarmonicIndexSet(scenario.hmax, scenario.f1)
    gss = build_grid_state_space(scenario.topology)
    grid_model = lift_grid_to_hss(gss, index_set)

    if not scenario.ciders:
        return SystemModel(
            scenario, index_set, grid_model, grid_model, (), None, None, None, None
        )

    by_node = {cfg.node_id: cfg for cfg in scenario.ciders}
    ciders = []
    for node_id in scenario.topology.ordered_ids:
        if node_id in by_node:
            ciders.append(assemble_cider(by_node[node_id], index_set))
        else:
            kind = dict((n.node_id, n.kind) for n in scenario.topology.nodes)[node_id]
            if kind == "forming":
                raise ConfigurationError(
                    f"forming node '{node_id}' has no resource"
                )
            ciders.append(make_zero_injection(index_set, node_id))
    ciders = tuple(ciders)

    resources = stack_resources(ciders)
    open_loop = build_open_loop(resources, grid_model, scenario.topology.ordered_ids)
    n_res_out, n_grid_out = open_loop.output_split
    interconnection = build_interconnection((n_res_out, n_grid_out))
    closed = close_loop(
        open_loop.model,
        interconnection.matrix,
        loop_port="gamma",
        provenance={c.node_id: c.operating_point for c in ciders},
        state_only=state_only,
    )
    return SystemModel(
        scenario,
        index_set,
        closed.model,
        grid_model,
        ciders,
        resources,
        open_loop,
        interconnection,
        closed,
    )
