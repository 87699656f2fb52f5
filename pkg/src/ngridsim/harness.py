"""Scenario assembly, Monte Carlo outage sampling, replication execution,
fleet aggregation, repair-time sweeps, and report emission.

Randomness is fully determined by (master_seed, replication_index,
feeder_id): each feeder gets its own counter-based stream, so adding feeders
or changing the repair time never perturbs another feeder's draws. One
uniform is pre-drawn per feeder-hour and the Bernoulli comparison is applied
only while no outage is active, which keeps outage *starts* identical across
repair-time sweep points.

The no-outage "total" ramp trajectory is outage-independent, so it is
computed once per scenario and shared across replications; a replication
only re-dispatches n-Grids on feeders that actually see an outage.
"""

from __future__ import annotations

import csv
import math
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dispatch import (PrechargePolicy, connected_step, initial_state,
                       islanded_step, ramp_capacity)
from .fleet import Fleet, validate_fleet
from .sor import SorTable


class ValidationError(ValueError):
    """Scenario or input-file contents violate the schema or an invariant."""


SERIES_FIELDS = ("load_kw", "pv_kw", "ens_kw", "spilled_kw",
                 "ru_total_kw", "ru_avail_kw", "rd_total_kw", "rd_avail_kw")


@dataclass
class Scenario:
    fleet: Fleet
    sor: SorTable
    horizon: int = 24
    repair_hours: float = 1.0
    replications: int = 1
    master_seed: int = 0
    sr_delivery_hours: float = 1.0
    derate: dict[tuple[str, int], float] | None = None
    precharge: str = "full"

    def derate_at(self, feeder_id: str, hour: int) -> float:
        if self.derate is None:
            return 1.0
        return self.derate.get((feeder_id, hour), 1.0)

    def policy(self) -> PrechargePolicy:
        if self.precharge == "sor":
            return PrechargePolicy(mode="sor", sor=self.sor)
        return PrechargePolicy(mode="full")


def validate_scenario(scenario: Scenario) -> list[str]:
    report = validate_fleet(scenario.fleet, scenario.horizon)
    if scenario.repair_hours <= 0:
        report.append(f"repair_hours must be > 0, got {scenario.repair_hours}")
    if scenario.replications < 1:
        report.append(f"replications must be >= 1, got {scenario.replications}")
    if scenario.sr_delivery_hours <= 0:
        report.append(f"sr_delivery_hours must be > 0, got {scenario.sr_delivery_hours}")
    try:
        scenario.sor.check_complete([f.id for f in scenario.fleet.feeders], scenario.horizon)
    except ValueError as exc:
        report.append(str(exc))
    if scenario.derate:
        for (f, h), factor in scenario.derate.items():
            if not (0.0 < factor <= 1.0):
                report.append(f"derate factor {factor} out of (0, 1] for feeder {f!r} hour {h}")
    if scenario.precharge not in ("full", "sor"):
        report.append(f"unknown precharge policy {scenario.precharge!r}")
    return report


@dataclass(frozen=True)
class OutageEvent:
    feeder_id: str
    start_hour: int
    duration_hours: int


@dataclass
class FleetSeries:
    """Hourly fleet totals; all arrays have length H."""

    load_kw: np.ndarray
    pv_kw: np.ndarray
    ens_kw: np.ndarray
    spilled_kw: np.ndarray
    ru_total_kw: np.ndarray
    ru_avail_kw: np.ndarray
    rd_total_kw: np.ndarray
    rd_avail_kw: np.ndarray

    @classmethod
    def zeros(cls, horizon: int) -> "FleetSeries":
        return cls(*(np.zeros(horizon) for _ in SERIES_FIELDS))

    def add_(self, other: "FleetSeries") -> None:
        for name in SERIES_FIELDS:
            getattr(self, name).__iadd__(getattr(other, name))

    def scaled(self, factor: float) -> "FleetSeries":
        return FleetSeries(*(getattr(self, name) * factor for name in SERIES_FIELDS))


@dataclass
class SimulationReport:
    mean_series: FleetSeries
    total_ens_mwh: float
    total_spilled_mwh: float
    max_ru_total_kw: float
    outage_logs: list[list[OutageEvent]]
    per_rep_ens_mwh: list[float]
    per_rep_spilled_mwh: list[float]


def feeder_rng(master_seed: int, replication_index: int, feeder_id: str) -> np.random.Generator:
    """Independent, reproducible stream per (seed, replication, feeder)."""
    tag = zlib.crc32(feeder_id.encode("utf-8"))
    return np.random.default_rng([master_seed, replication_index, tag])


def sample_outages(sor: SorTable, repair_hours: float, horizon: int,
                   rng_for_feeder) -> list[OutageEvent]:
    """Bernoulli scan per feeder-hour; new draws are suppressed while an
    outage is active. ``rng_for_feeder`` maps a feeder id to its Generator.

    One uniform is drawn for every hour up front, so the set of potential
    start hours does not depend on the repair duration.
    """
    duration = max(1, math.ceil(repair_hours))
    events: list[OutageEvent] = []
    for feeder_id in sor.feeder_ids:
        u = rng_for_feeder(feeder_id).random(horizon)
        active_until = 0
        for h in range(horizon):
            if h < active_until:
                continue
            if u[h] < sor.get(feeder_id, h):
                events.append(OutageEvent(feeder_id=feeder_id, start_hour=h,
                                          duration_hours=min(duration, horizon - h)))
                active_until = h + duration
    return events


def islanded_mask(events: list[OutageEvent], feeder_id: str, horizon: int) -> np.ndarray:
    mask = np.zeros(horizon, dtype=bool)
    for ev in events:
        if ev.feeder_id == feeder_id:
            mask[ev.start_hour:ev.start_hour + ev.duration_hours] = True
    return mask


@dataclass
class _FeederShadow:
    load_kw: np.ndarray
    pv_kw: np.ndarray
    ru_kw: np.ndarray
    rd_kw: np.ndarray


@dataclass
class _Shadow:
    """Connected-mode (no-outage) trajectory for the whole fleet."""

    per_feeder: dict[str, _FeederShadow]

    def fleet_total(self, name: str, horizon: int) -> np.ndarray:
        total = np.zeros(horizon)
        for fs in self.per_feeder.values():
            total += getattr(fs, name)
        return total


def compute_shadow(scenario: Scenario) -> _Shadow:
    H = scenario.horizon
    policy = scenario.policy()
    per_feeder: dict[str, _FeederShadow] = {}
    for feeder in scenario.fleet.feeders:
        fs = _FeederShadow(np.zeros(H), np.zeros(H), np.zeros(H), np.zeros(H))
        for nid in feeder.ngrid_ids:
            ngrid = scenario.fleet.ngrid(nid)
            state = initial_state(ngrid)
            for h in range(H):
                outcome, state = connected_step(ngrid, state, h, policy)
                ramp = ramp_capacity(ngrid, state, outcome,
                                     scenario.sr_delivery_hours,
                                     scenario.derate_at(feeder.id, h))
                fs.load_kw[h] += outcome.served_load_kw
                fs.pv_kw[h] += outcome.pv_kw
                fs.ru_kw[h] += ramp.ru_kw
                fs.rd_kw[h] += ramp.rd_kw
        per_feeder[feeder.id] = fs
    return _Shadow(per_feeder)


def run_replication(scenario: Scenario, replication_index: int,
                    shadow: _Shadow | None = None) -> tuple[FleetSeries, list[OutageEvent]]:
    """Sample outages, dispatch every n-Grid through every hour, and return
    fleet totals plus the outage log for one replication.

    N-Grids on feeders with no outage this replication follow the cached
    connected-mode trajectory exactly, so only disturbed feeders are
    re-dispatched.
    """
    if shadow is None:
        shadow = compute_shadow(scenario)
    H = scenario.horizon
    events = sample_outages(
        scenario.sor, scenario.repair_hours, H,
        lambda fid: feeder_rng(scenario.master_seed, replication_index, fid))

    series = FleetSeries.zeros(H)
    series.load_kw += shadow.fleet_total("load_kw", H)
    series.pv_kw += shadow.fleet_total("pv_kw", H)
    series.ru_total_kw += shadow.fleet_total("ru_kw", H)
    series.rd_total_kw += shadow.fleet_total("rd_kw", H)
    series.ru_avail_kw += series.ru_total_kw
    series.rd_avail_kw += series.rd_total_kw

    policy = scenario.policy()
    disturbed = sorted({ev.feeder_id for ev in events})
    for feeder_id in disturbed:
        fs = shadow.per_feeder[feeder_id]
        mask = islanded_mask(events, feeder_id, H)
        # Islanded n-Grids deliver no ramp capacity; healthy-feeder
        # contributions are identical in total and available series.
        series.ru_avail_kw -= np.where(mask, fs.ru_kw, 0.0)
        series.rd_avail_kw -= np.where(mask, fs.rd_kw, 0.0)
        series.load_kw -= fs.load_kw
        series.pv_kw -= fs.pv_kw
        for ngrid in scenario.fleet.ngrids_on(feeder_id):
            state = initial_state(ngrid)
            for h in range(H):
                if mask[h]:
                    outcome, state = islanded_step(ngrid, state, h)
                else:
                    outcome, state = connected_step(ngrid, state, h, policy)
                series.load_kw[h] += outcome.served_load_kw + outcome.ens_kw
                series.pv_kw[h] += outcome.pv_kw
                series.ens_kw[h] += outcome.ens_kw
                series.spilled_kw[h] += outcome.spilled_kw
    return series, events


def run_simulation(scenario: Scenario, workers: int | None = None) -> SimulationReport:
    """Run all replications and average the fleet series element-wise.

    Replications are independent; with ``workers`` > 1 they run on a thread
    pool. Aggregation always reduces in replication order, so the result is
    bit-identical regardless of scheduling.
    """
    problems = validate_scenario(scenario)
    if problems:
        raise ValidationError("; ".join(problems))
    shadow = compute_shadow(scenario)
    reps = scenario.replications

    def one(i: int) -> tuple[FleetSeries, list[OutageEvent]]:
        return run_replication(scenario, i, shadow)

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(reps)))
    else:
        results = [one(i) for i in range(reps)]

    total = FleetSeries.zeros(scenario.horizon)
    outage_logs = []
    per_rep_ens = []
    per_rep_spilled = []
    for series, events in results:
        total.add_(series)
        outage_logs.append(events)
        per_rep_ens.append(float(series.ens_kw.sum()) / 1000.0)
        per_rep_spilled.append(float(series.spilled_kw.sum()) / 1000.0)
    mean = total.scaled(1.0 / reps)
    return SimulationReport(
        mean_series=mean,
        total_ens_mwh=float(mean.ens_kw.sum()) / 1000.0,
        total_spilled_mwh=float(mean.spilled_kw.sum()) / 1000.0,
        max_ru_total_kw=float(mean.ru_total_kw.max()),
        outage_logs=outage_logs,
        per_rep_ens_mwh=per_rep_ens,
        per_rep_spilled_mwh=per_rep_spilled,
    )


def sweep_repair_time(scenario: Scenario, repair_values: list[float],
                      workers: int | None = None) -> list[tuple[float, float, float]]:
    """Re-run the simulation per repair time with identical seeds, so only
    the outage durations change. Rows: (repair_hours, ens MWh, spilled MWh)."""
    if not repair_values:
        raise ValidationError("repair_values must be non-empty")
    if any(b <= a for a, b in zip(repair_values, repair_values[1:])):
        raise ValidationError("repair_values must be strictly increasing")
    rows = []
    for value in repair_values:
        variant = Scenario(fleet=scenario.fleet, sor=scenario.sor,
                           horizon=scenario.horizon, repair_hours=value,
                           replications=scenario.replications,
                           master_seed=scenario.master_seed,
                           sr_delivery_hours=scenario.sr_delivery_hours,
                           derate=scenario.derate, precharge=scenario.precharge)
        report = run_simulation(variant, workers)
        rows.append((value, report.total_ens_mwh, report.total_spilled_mwh))
    return rows


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def emit_report(report: SimulationReport,
                sweep: list[tuple[float, float, float]] | None,
                out_dir) -> list[str]:
    """Write fleet_series.csv, summary.csv, outages.csv, and (when a sweep is
    given) sweep.csv. Output is byte-identical for identical inputs."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path(name: str) -> str:
        return os.path.join(out_dir, name)

    try:
        series = report.mean_series
        with open(path("fleet_series.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("hour",) + SERIES_FIELDS)
            for h in range(len(series.load_kw)):
                writer.writerow([h] + [_fmt(getattr(series, name)[h]) for name in SERIES_FIELDS])
        written.append(path("fleet_series.csv"))

        with open(path("summary.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["total_ens_mwh", "total_spilled_mwh", "max_ru_total_kw"])
            writer.writerow([_fmt(report.total_ens_mwh), _fmt(report.total_spilled_mwh),
                             _fmt(report.max_ru_total_kw)])
        written.append(path("summary.csv"))

        with open(path("outages.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["replication", "feeder_id", "start_hour", "duration_hours"])
            for rep, events in enumerate(report.outage_logs):
                for ev in events:
                    writer.writerow([rep, ev.feeder_id, ev.start_hour, ev.duration_hours])
        written.append(path("outages.csv"))

        if sweep:
            with open(path("sweep.csv"), "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["repair_hours", "total_ens_mwh", "total_spilled_mwh"])
                for repair, ens, spilled in sweep:
                    writer.writerow([_fmt(repair), _fmt(ens), _fmt(spilled)])
            written.append(path("sweep.csv"))
    except OSError as exc:
        raise OSError(f"failed writing report to {out_dir}: {exc}") from exc
    return written
