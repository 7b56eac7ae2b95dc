"""Experiment drivers: placement runs, penetration sweeps, debug dispatch."""

from __future__ import annotations

import logging
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dispatch import lookahead_dispatch, verify_dispatch
from .errors import ValidationError
from .fileio import load_network_document
from .placement import (
    PlacementState,
    baseline_nodes,
    evaluate_fixed_placement,
    evaluate_subset,
    greedy_placement,
)
from .reporting import Report, emit_report
from .scenarios import ScenarioSet, compute_penetration, generate_synthetic, load_scenarios_csv

logger = logging.getLogger(__name__)


def build_scenarios(cfg: RunConfig, network, base_load) -> ScenarioSet:
    spec = cfg.scenario_spec
    if spec.get("type", "synthetic") == "csv":
        return load_scenarios_csv(spec["paths"], network, float(spec["dt_hours"]))
    if base_load.sum() <= 0:
        raise ValidationError(
            "synthetic scenarios need base_load_mw entries in the network file"
        )
    params, dt, n_steps = cfg.synthetic_params()
    return generate_synthetic(network, base_load, params, dt, n_steps)


def _iteration_rows(state: PlacementState) -> list[dict]:
    rows = []
    for i, rec in enumerate(state.rounds):
        rows.append(
            {
                "round": i,
                "set_size": len(rec.nodes),
                "perf": float(rec.perf),
                "energy_metric": float(rec.energy_metric),
                "power_metric": float(rec.power_metric),
                "gamma": None if rec.gamma is None else float(rec.gamma),
                "dropped": rec.dropped,
            }
        )
    return rows


def _capacity_rows(stats) -> list[dict]:
    return [
        {"bus": int(b), "s_bar_mwh": float(s), "ps_bar_mw": float(p)}
        for b, s, p in zip(stats.nodes, stats.s_bar_max, stats.ps_bar_max)
    ]


def run_place(cfg: RunConfig) -> Report:
    """Full pipeline: scenarios, greedy pruning, baseline comparison, report."""
    t_start = time.perf_counter()
    network, base_load = load_network_document(cfg.network_path)
    sset = build_scenarios(cfg, network, base_load)
    t_scen = time.perf_counter()

    state = greedy_placement(
        network,
        sset,
        cfg.weights,
        epsilon=cfg.epsilon,
        epsilon_prime=cfg.epsilon_prime,
        dispatch=cfg.dispatch,
        backend=cfg.solver,
        jobs=cfg.jobs,
    )
    t_greedy = time.perf_counter()

    baseline = None
    if cfg.baseline:
        nodes = baseline_nodes(network, sset)
        if not nodes:
            baseline = {"note": "no renewable or intertie buses to place at"}
        else:
            try:
                stats, metrics = evaluate_fixed_placement(
                    network, sset, nodes, cfg.weights, cfg.dispatch, cfg.solver, cfg.jobs
                )
                greedy_energy = state.rounds[-1].energy_metric
                greedy_power = state.rounds[-1].power_metric
                baseline = {
                    "nodes": sorted(int(b) for b in nodes),
                    "energy_metric": metrics["energy_metric"],
                    "power_metric": metrics["power_metric"],
                    "perf": metrics["perf"],
                    "energy_ratio_vs_greedy": (
                        metrics["energy_metric"] / greedy_energy if greedy_energy > 0 else None
                    ),
                    "power_ratio_vs_greedy": (
                        metrics["power_metric"] / greedy_power if greedy_power > 0 else None
                    ),
                    "capacities": _capacity_rows(stats),
                }
            except Exception as exc:  # baseline failure should not kill the run
                baseline = {"error": f"{type(exc).__name__}: {exc}"}
                logger.warning("baseline evaluation failed: %s", exc)
    t_done = time.perf_counter()

    return Report(
        config=cfg.raw,
        iterations=_iteration_rows(state),
        final_placement=_capacity_rows(state.stats),
        baseline=baseline,
        histograms={str(i): _capacity_rows(rec.stats) for i, rec in enumerate(state.rounds)},
        sweep=[],
        timing={
            "scenario_seconds": t_scen - t_start,
            "greedy_seconds": t_greedy - t_scen,
            "baseline_seconds": t_done - t_greedy,
            "total_seconds": t_done - t_start,
        },
    )


def run_sweep(cfg: RunConfig, levels=None) -> Report:
    """Storage-at-all-nodes metrics across renewable penetration levels."""
    levels = list(levels) if levels is not None else list(cfg.sweep_levels)
    if not levels:
        raise ValidationError("sweep needs at least one penetration level")
    if sorted(levels) != levels or any(not 0.0 < v < 1.0 for v in levels):
        raise ValidationError("sweep levels must be ascending and strictly inside (0, 1)")
    if cfg.scenario_spec.get("type", "synthetic") != "synthetic":
        raise ValidationError("sweep requires a synthetic scenario source")

    t_start = time.perf_counter()
    network, base_load = load_network_document(cfg.network_path)
    params, dt, n_steps = cfg.synthetic_params()
    all_nodes = frozenset(range(network.n_buses))

    rows = []
    for level in levels:
        sset = generate_synthetic(
            network, base_load, replace(params, penetration_target=level), dt, n_steps
        )
        ev = evaluate_subset(
            network, sset, all_nodes, cfg.weights, cfg.dispatch, cfg.solver, cfg.jobs
        )
        rows.append(
            {
                "penetration_target": level,
                "penetration_mean": float(np.mean([compute_penetration(s) for s in sset])),
                "energy_metric": float(ev.energy_metric),
                "power_metric": float(ev.power_metric),
                "perf": float(ev.perf),
            }
        )
        logger.info("sweep level %.3f: energy=%.4f power=%.4f", level, rows[-1]["energy_metric"], rows[-1]["power_metric"])

    return Report(
        config=dict(cfg.raw, sweep={"levels": levels}),
        sweep=rows,
        timing={"total_seconds": time.perf_counter() - t_start},
    )


def run_dispatch_debug(cfg: RunConfig, scenario_index: int) -> dict:
    """Solve one scenario with storage everywhere and report the physics."""
    network, base_load = load_network_document(cfg.network_path)
    sset = build_scenarios(cfg, network, base_load)
    if not 0 <= scenario_index < len(sset):
        raise ValidationError(
            f"scenario index {scenario_index} out of range (set has {len(sset)})"
        )
    scen = sset.scenarios[scenario_index]
    config = replace(cfg.dispatch, storage_nodes=frozenset(range(network.n_buses)))
    sol = lookahead_dispatch(network, scen, config, backend=cfg.solver)
    residuals = verify_dispatch(network, scen, sol)
    used = [
        {"bus": int(b), "s_bar_mwh": float(s), "ps_bar_mw": float(p)}
        for b, s, p in zip(sol.storage_nodes, sol.s_bar, sol.ps_bar)
        if s > 1e-9 or p > 1e-9
    ]
    return {
        "scenario": scen.label,
        "objective": float(sol.objective),
        "generation_cost": float(sol.generation_cost),
        "storage_cost": float(sol.storage_cost),
        "penetration": compute_penetration(scen),
        "storage_used": used,
        "max_abs_flow_mw": float(np.abs(sol.flows).max(initial=0.0)),
        "residuals": residuals,
    }


def write_error_record(out_dir, exc: Exception, exit_code: int) -> None:
    """Machine-readable failure marker; best effort."""
    import json

    try:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "error.json", "w") as fh:
            json.dump(
                {"error_type": type(exc).__name__, "message": str(exc), "exit_code": exit_code},
                fh,
                indent=2,
            )
            fh.write("\n")
    except OSError:
        logger.warning("could not write error record to %s", out_dir)
