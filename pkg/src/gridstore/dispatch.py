"""Time-coupled lookahead dispatch of generation and storage.

One scenario plus one candidate storage node set becomes a single LP over
the whole horizon.  Decision variables are generator setpoints pg(t),
storage injections ps(t) (positive = discharging into the grid), non-slack
bus angles theta(t), and per-node storage sizing variables: energy capacity
s_bar (MWh), power rating ps_bar (MW), and the initial state of charge s0.

Constraints per step: nodal flow balance through the network Laplacian,
line flow limits, generator ramp limits between consecutive steps, state of
charge kept inside [0, s_bar] at every step boundary via the running sum of
injections, |ps| <= ps_bar, and zero net storage energy over the horizon.
Generation cost is integrated over time (multiplied by the step length) so
it shares units with the capacity cost terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp as lpmod
from .errors import (
    DisconnectedNetwork,
    InconsistentDimensions,
    InfeasibleScenario,
    SolverFailure,
    ValidationError,
)
from .lp import LinearProgram, Status
from .network import Network, build_laplacian, check_connected

CURTAIL_PENALTY = 1e4  # $/MWh, large against any sane fuel cost


@dataclass(eq=False)
class Scenario:
    """Known time profiles driving one dispatch: all arrays are MW.

    ``renewable`` is (n_steps, n_sites), ``load`` and ``interchange`` are
    (n_steps, n_buses).  Loads are stored as nonnegative consumption and
    applied as negative injections; interchange is a signed fixed injection.
    """

    dt_hours: float
    renewable: np.ndarray
    load: np.ndarray
    interchange: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        self.renewable = np.atleast_2d(np.asarray(self.renewable, dtype=float))
        self.load = np.atleast_2d(np.asarray(self.load, dtype=float))
        if self.interchange is None:
            self.interchange = np.zeros_like(self.load)
        else:
            self.interchange = np.atleast_2d(np.asarray(self.interchange, dtype=float))
        if self.dt_hours <= 0:
            raise ValidationError("dt_hours must be positive")
        if self.n_steps < 1:
            raise ValidationError("scenario needs at least one step")
        if self.load.shape[0] != self.n_steps or self.interchange.shape != self.load.shape:
            raise ValidationError("scenario series disagree on the number of steps")
        if np.any(self.renewable < 0) or np.any(self.load < 0):
            raise ValidationError("renewable and load series must be nonnegative")

    @property
    def n_steps(self) -> int:
        return self.renewable.shape[0]


@dataclass(frozen=True)
class DispatchConfig:
    storage_nodes: frozenset[int] = frozenset()
    storage_energy_cost: float = 200.0  # $ per MWh of s_bar
    storage_power_cost: float = 20.0  # $ per MW of ps_bar
    allow_curtailment: bool = False
    initial_soc_free: bool = True  # False pins s0 at s_bar / 2
    # operational re-solve mode: pin capacities instead of optimizing them
    s_bar_fixed: tuple[float, ...] | None = None  # per sorted storage node, MWh
    ps_bar_fixed: tuple[float, ...] | None = None  # per sorted storage node, MW

    def __post_init__(self):
        object.__setattr__(self, "storage_nodes", frozenset(self.storage_nodes))
        if self.storage_energy_cost < 0 or self.storage_power_cost < 0:
            raise ValidationError("storage capacity costs must be nonnegative")


class DispatchIndex:
    """Column layout of the dispatch LP and the decoding that goes with it."""

    def __init__(self, network: Network, scenario: Scenario, config: DispatchConfig):
        self.T = scenario.n_steps
        self.n_gen = len(network.generators)
        self.n_buses = network.n_buses
        self.slack = network.slack
        self.storage = sorted(config.storage_nodes)
        self.n_store = len(self.storage)
        self.n_sites = len(network.renewables)
        self.curtail_on = config.allow_curtailment
        self.sized = config.s_bar_fixed is None  # capacities are variables

        self.non_slack = [i for i in range(self.n_buses) if i != self.slack]
        self._theta_pos = {bus: k for k, bus in enumerate(self.non_slack)}
        self._store_pos = {bus: k for k, bus in enumerate(self.storage)}

        T, G, K = self.T, self.n_gen, self.n_store
        self._pg0 = 0
        self._ps0 = self._pg0 + T * G
        self._th0 = self._ps0 + T * K
        self._sbar0 = self._th0 + T * (self.n_buses - 1)
        n_cap = K if self.sized else 0
        self._psbar0 = self._sbar0 + n_cap
        self._s00 = self._psbar0 + n_cap
        self._cur0 = self._s00 + K
        self.n_vars = self._cur0 + (T * self.n_sites if self.curtail_on else 0)

    def pg(self, t: int, g: int) -> int:
        return self._pg0 + t * self.n_gen + g

    def ps(self, t: int, node: int) -> int:
        return self._ps0 + t * self.n_store + self._store_pos[node]

    def theta(self, t: int, bus: int) -> int:
        return self._th0 + t * (self.n_buses - 1) + self._theta_pos[bus]

    def s_bar(self, node: int) -> int:
        return self._sbar0 + self._store_pos[node]

    def ps_bar(self, node: int) -> int:
        return self._psbar0 + self._store_pos[node]

    def s0(self, node: int) -> int:
        return self._s00 + self._store_pos[node]

    def curtail(self, t: int, site: int) -> int:
        return self._cur0 + t * self.n_sites + site


@dataclass(eq=False)
class DispatchSolution:
    status: Status
    pg: np.ndarray  # (T, n_gen) MW
    ps: np.ndarray  # (T, n_store) MW, positive discharging
    soc: np.ndarray  # (T+1, n_store) MWh
    theta: np.ndarray  # (T, n_buses) rad
    flows: np.ndarray  # (T, n_lines) MW
    s_bar: np.ndarray  # (n_store,) MWh
    ps_bar: np.ndarray  # (n_store,) MW
    storage_nodes: tuple[int, ...]
    generation_cost: float
    storage_cost: float
    curtailed: np.ndarray | None = None  # (T, n_sites) MW when enabled
    objective: float = 0.0


def _check_shapes(network: Network, scenario: Scenario, config: DispatchConfig) -> None:
    if scenario.load.shape[1] != network.n_buses:
        raise InconsistentDimensions(
            f"load series covers {scenario.load.shape[1]} buses, network has {network.n_buses}"
        )
    if scenario.renewable.shape[1] != len(network.renewables):
        raise InconsistentDimensions(
            f"renewable series covers {scenario.renewable.shape[1]} sites, "
            f"network has {len(network.renewables)}"
        )
    bad = [b for b in config.storage_nodes if not 0 <= b < network.n_buses]
    if bad:
        raise InconsistentDimensions(f"storage nodes {bad} not in network")
    for name in ("s_bar_fixed", "ps_bar_fixed"):
        fixed = getattr(config, name)
        if fixed is not None and len(fixed) != len(config.storage_nodes):
            raise InconsistentDimensions(f"{name} length does not match storage node count")


def build_dispatch_lp(
    network: Network, scenario: Scenario, config: DispatchConfig
) -> tuple[LinearProgram, DispatchIndex]:
    """Assemble the horizon LP; returns the program and its variable map."""
    _check_shapes(network, scenario, config)
    if not check_connected(network):
        raise DisconnectedNetwork("dispatch requires a connected network")

    idx = DispatchIndex(network, scenario, config)
    T, dt = idx.T, scenario.dt_hours
    gens = network.generators
    lap = build_laplacian(network)

    cost = np.zeros(idx.n_vars)
    lower = np.full(idx.n_vars, -np.inf)
    upper = np.full(idx.n_vars, np.inf)

    for t in range(T):
        for g, gen in enumerate(gens):
            j = idx.pg(t, g)
            cost[j] = gen.cost * dt
            lower[j], upper[j] = 0.0, gen.p_max
    for k, node in enumerate(idx.storage):
        if idx.sized:
            j = idx.s_bar(node)
            cost[j] = config.storage_energy_cost
            lower[j] = 0.0
            j = idx.ps_bar(node)
            cost[j] = config.storage_power_cost
            lower[j] = 0.0
            lower[idx.s0(node)] = 0.0
        else:
            s_cap = config.s_bar_fixed[k]
            p_cap = config.ps_bar_fixed[k] if config.ps_bar_fixed is not None else np.inf
            lower[idx.s0(node)], upper[idx.s0(node)] = 0.0, s_cap
            for t in range(T):
                j = idx.ps(t, node)
                lower[j], upper[j] = -p_cap, p_cap
    if idx.curtail_on:
        for t in range(T):
            for s in range(idx.n_sites):
                j = idx.curtail(t, s)
                cost[j] = CURTAIL_PENALTY * dt
                lower[j], upper[j] = 0.0, scenario.renewable[t, s]

    prog = LinearProgram(n_vars=idx.n_vars, cost=cost, var_lower=lower, var_upper=upper)

    gens_at = [[] for _ in range(idx.n_buses)]
    for g, gen in enumerate(gens):
        gens_at[gen.bus].append(g)
    sites_at = [[] for _ in range(idx.n_buses)]
    for s, site in enumerate(network.renewables):
        sites_at[site.bus].append(s)
    storage_set = set(idx.storage)

    # nodal balance: L theta - pg - ps (+ curtail) = p_r - load + interchange
    for t in range(T):
        for i in range(idx.n_buses):
            entries: dict[int, float] = {}
            for jbus in range(idx.n_buses):
                if lap[i, jbus] != 0.0 and jbus != idx.slack:
                    entries[idx.theta(t, jbus)] = lap[i, jbus]
            for g in gens_at[i]:
                entries[idx.pg(t, g)] = -1.0
            if i in storage_set:
                entries[idx.ps(t, i)] = -1.0
            rhs = float(scenario.interchange[t, i] - scenario.load[t, i])
            for s in sites_at[i]:
                rhs += float(scenario.renewable[t, s])
                if idx.curtail_on:
                    entries[idx.curtail(t, s)] = 1.0
            prog.add_row(entries, rhs, rhs)

    # line flow limits
    for t in range(T):
        for line in network.lines:
            if line.flow_limit is None:
                continue
            entries = {}
            w = 1.0 / line.reactance
            if line.from_bus != idx.slack:
                entries[idx.theta(t, line.from_bus)] = w
            if line.to_bus != idx.slack:
                entries[idx.theta(t, line.to_bus)] = entries.get(idx.theta(t, line.to_bus), 0.0) - w
            prog.add_row(entries, -line.flow_limit, line.flow_limit)

    # generator ramping between consecutive steps
    for t in range(1, T):
        for g, gen in enumerate(gens):
            if not np.isfinite(gen.ramp_limit):
                continue
            prog.add_row(
                {idx.pg(t, g): 1.0, idx.pg(t - 1, g): -1.0},
                -gen.ramp_limit,
                gen.ramp_limit,
            )

    # state of charge inside [0, s_bar] at every boundary, via running sums
    for node in idx.storage:
        if idx.sized:
            prog.add_row({idx.s0(node): 1.0, idx.s_bar(node): -1.0}, -np.inf, 0.0)
            if not config.initial_soc_free:
                prog.add_row({idx.s0(node): 1.0, idx.s_bar(node): -0.5}, 0.0, 0.0)
        elif not config.initial_soc_free:
            k = idx._store_pos[node]
            half = 0.5 * config.s_bar_fixed[k]
            prog.add_row({idx.s0(node): 1.0}, half, half)
        for t in range(1, T + 1):
            cum = {idx.ps(tau, node): -dt for tau in range(t)}
            cum[idx.s0(node)] = 1.0
            prog.add_row(dict(cum), 0.0, np.inf)  # soc >= 0
            if idx.sized:
                cum[idx.s_bar(node)] = -1.0
                prog.add_row(cum, -np.inf, 0.0)  # soc <= s_bar
            else:
                k = idx._store_pos[node]
                prog.add_row(cum, -np.inf, config.s_bar_fixed[k])

    # |ps| <= ps_bar when the rating is a variable
    if idx.sized:
        for t in range(T):
            for node in idx.storage:
                prog.add_row({idx.ps(t, node): 1.0, idx.ps_bar(node): -1.0}, -np.inf, 0.0)
                prog.add_row({idx.ps(t, node): 1.0, idx.ps_bar(node): 1.0}, 0.0, np.inf)

    # zero net energy exchanged with storage over the horizon
    if idx.storage:
        prog.add_row(
            {idx.ps(t, node): dt for t in range(T) for node in idx.storage},
            0.0,
            0.0,
        )

    return prog, idx


def decode_solution(
    network: Network,
    scenario: Scenario,
    config: DispatchConfig,
    idx: DispatchIndex,
    sol: lpmod.LpSolution,
) -> DispatchSolution:
    x = sol.x
    T = idx.T
    dt = scenario.dt_hours
    pg = np.array([[x[idx.pg(t, g)] for g in range(idx.n_gen)] for t in range(T)])
    ps = np.array([[x[idx.ps(t, b)] for b in idx.storage] for t in range(T)])
    ps = ps.reshape(T, idx.n_store)
    s0 = np.array([x[idx.s0(b)] for b in idx.storage])
    soc = np.vstack([s0, s0 - dt * np.cumsum(ps, axis=0)]) if idx.n_store else np.zeros((T + 1, 0))
    theta = np.zeros((T, idx.n_buses))
    for t in range(T):
        for bus in idx.non_slack:
            theta[t, bus] = x[idx.theta(t, bus)]
    flows = np.array(
        [
            [(theta[t, ln.from_bus] - theta[t, ln.to_bus]) / ln.reactance for ln in network.lines]
            for t in range(T)
        ]
    ).reshape(T, len(network.lines))
    if idx.sized:
        s_bar = np.array([x[idx.s_bar(b)] for b in idx.storage])
        ps_bar = np.array([x[idx.ps_bar(b)] for b in idx.storage])
    else:
        s_bar = np.asarray(config.s_bar_fixed, dtype=float)
        ps_bar = (
            np.asarray(config.ps_bar_fixed, dtype=float)
            if config.ps_bar_fixed is not None
            else np.max(np.abs(ps), axis=0, initial=0.0) * np.ones(idx.n_store)
        )
    curtailed = None
    if idx.curtail_on:
        curtailed = np.array(
            [[x[idx.curtail(t, s)] for s in range(idx.n_sites)] for t in range(T)]
        ).reshape(T, idx.n_sites)
    gen_cost = float(sum(network.generators[g].cost * dt * pg[:, g].sum() for g in range(idx.n_gen)))
    store_cost = float(
        config.storage_energy_cost * s_bar.sum() + config.storage_power_cost * ps_bar.sum()
    ) if idx.sized else 0.0
    return DispatchSolution(
        status=sol.status,
        pg=pg.reshape(T, idx.n_gen),
        ps=ps,
        soc=soc,
        theta=theta,
        flows=flows,
        s_bar=s_bar,
        ps_bar=ps_bar,
        storage_nodes=tuple(idx.storage),
        generation_cost=gen_cost,
        storage_cost=store_cost,
        curtailed=curtailed,
        objective=sol.objective,
    )


def lookahead_dispatch(
    network: Network,
    scenario: Scenario,
    config: DispatchConfig,
    backend: str = "highs",
) -> DispatchSolution:
    """Build and solve the horizon LP for one scenario.

    Raises InfeasibleScenario (with the scenario label) when no dispatch
    satisfies the constraints, SolverFailure on any other non-optimal stop.
    """
    prog, idx = build_dispatch_lp(network, scenario, config)
    sol = lpmod.solve_with_backend(prog, backend)
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleScenario(scenario.label or "<unnamed>")
    if sol.status is not Status.OPTIMAL:
        raise SolverFailure(f"dispatch LP ended with status {sol.status.value}")
    return decode_solution(network, scenario, config, idx, sol)


def verify_dispatch(
    network: Network,
    scenario: Scenario,
    sol: DispatchSolution,
) -> dict[str, float]:
    """Residuals of the physical identities on a decoded solution.

    Keys: power_balance (MW), energy_bookkeeping (MWh), terminal (MWh),
    soc_bounds (MWh), ps_bounds (MW).  All should be ~0 for an optimal point.
    """
    T = scenario.n_steps
    dt = scenario.dt_hours
    store_pos = {b: k for k, b in enumerate(sol.storage_nodes)}
    balance = 0.0
    for t in range(T):
        inj = np.zeros(network.n_buses)
        for g, gen in enumerate(network.generators):
            inj[gen.bus] += sol.pg[t, g]
        for s, site in enumerate(network.renewables):
            out = scenario.renewable[t, s]
            if sol.curtailed is not None:
                out -= sol.curtailed[t, s]
            inj[site.bus] += out
        for b, k in store_pos.items():
            inj[b] += sol.ps[t, k]
        inj += scenario.interchange[t] - scenario.load[t]
        # flows must carry exactly the nodal injections
        carried = np.zeros(network.n_buses)
        for ln, line in enumerate(network.lines):
            carried[line.from_bus] += sol.flows[t, ln]
            carried[line.to_bus] -= sol.flows[t, ln]
        balance = max(balance, float(np.max(np.abs(inj - carried), initial=0.0)))
        balance = max(balance, abs(float(inj.sum())))
    book = 0.0
    for t in range(T):
        drift = sol.soc[t + 1] - sol.soc[t] + dt * sol.ps[t]
        if drift.size:
            book = max(book, float(np.max(np.abs(drift))))
    terminal = abs(float(sol.soc[-1].sum() - sol.soc[0].sum())) if sol.soc.size else 0.0
    soc_bounds = 0.0
    ps_bounds = 0.0
    if sol.soc.size:
        soc_bounds = float(
            max(
                np.max(np.maximum(-sol.soc, 0.0), initial=0.0),
                np.max(np.maximum(sol.soc - sol.s_bar[None, :], 0.0), initial=0.0),
            )
        )
        ps_bounds = float(np.max(np.maximum(np.abs(sol.ps) - sol.ps_bar[None, :], 0.0), initial=0.0))
    return {
        "power_balance": balance,
        "energy_bookkeeping": book,
        "terminal": terminal,
        "soc_bounds": soc_bounds,
        "ps_bounds": ps_bounds,
    }


def renewable_fluctuation_energy(scenario: Scenario) -> np.ndarray:
    """Energy absorbed by a hypothetical co-located battery, per site.

    Cumulative sum of the mean-centered renewable output times the step
    length; shape (n_steps + 1, n_sites) with zeros at both ends.
    """
    dev = scenario.renewable - scenario.renewable.mean(axis=0, keepdims=True)
    cum = np.cumsum(dev * scenario.dt_hours, axis=0)
    return np.vstack([np.zeros((1, scenario.renewable.shape[1])), cum])
