"""Scenario and fleet file loading.

Scenario files are YAML with scalar settings plus paths (relative to the
scenario file) for the fleet config, the profiles CSV, the SoR CSV, and an
optional derate CSV. Fleet configs are YAML: feeders with per-n-Grid blocks
declaring BESS, EVs (plug hours as ranges like ``0-6,19-23``), HVAC
(constant or per-hour list), and deferrable tasks. Profiles come from a
``ngrid_id,hour,load_kw,pv_kw`` CSV with one row per n-Grid hour.
"""

from __future__ import annotations

import csv
import os

import yaml

from .fleet import (DeferrableTask, ElectricVehicle, Feeder, Fleet,
                    HourlyProfile, HvacAsset, NGrid, StorageUnit)
from .harness import Scenario, ValidationError
from .sor import load_sor_table


def parse_plug_hours(spec) -> set[int]:
    """``"0-6,19-23"`` (or a list of ints) -> set of hour indices."""
    if isinstance(spec, (list, tuple)):
        return {int(h) for h in spec}
    hours: set[int] = set()
    for part in str(spec).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValidationError(f"plug hour range {part!r} is reversed")
            hours.update(range(lo, hi + 1))
        else:
            hours.add(int(part))
    return hours


def _profile(value, horizon: int, where: str) -> HourlyProfile:
    if isinstance(value, (int, float)):
        return HourlyProfile.constant(float(value), horizon)
    if isinstance(value, (list, tuple)):
        if len(value) != horizon:
            raise ValidationError(f"{where}: profile length {len(value)} != horizon {horizon}")
        return HourlyProfile(value)
    raise ValidationError(f"{where}: expected a number or a list of {horizon} numbers")


def load_profiles(path, horizon: int) -> dict[str, tuple[HourlyProfile, HourlyProfile]]:
    """Per-n-Grid (load, pv) profiles from CSV; every hour must be present."""
    load: dict[str, list] = {}
    pv: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"ngrid_id", "hour", "load_kw", "pv_kw"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValidationError(f"{path}: expected header with columns {sorted(required)}")
        for rec in reader:
            nid = rec["ngrid_id"]
            h = int(rec["hour"])
            if nid not in load:
                load[nid] = [None] * horizon
                pv[nid] = [None] * horizon
            if not (0 <= h < horizon):
                raise ValidationError(f"{path}: hour {h} out of range for n-Grid {nid!r}")
            if load[nid][h] is not None:
                raise ValidationError(f"{path}: duplicate row for n-Grid {nid!r} hour {h}")
            load[nid][h] = float(rec["load_kw"])
            pv[nid][h] = float(rec["pv_kw"])
    profiles = {}
    for nid in load:
        for h in range(horizon):
            if load[nid][h] is None:
                raise ValidationError(f"{path}: n-Grid {nid!r} missing hour {h}")
        profiles[nid] = (HourlyProfile(load[nid]), HourlyProfile(pv[nid]))
    return profiles


def load_fleet(fleet_path, profiles_path, horizon: int) -> Fleet:
    with open(fleet_path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or "feeders" not in doc:
        raise ValidationError(f"{fleet_path}: expected a top-level 'feeders' list")
    profiles = load_profiles(profiles_path, horizon)

    feeders = []
    ngrids = []
    for fdoc in doc["feeders"]:
        feeder_id = str(fdoc["id"])
        ngrid_ids = []
        for ndoc in fdoc.get("ngrids", []):
            nid = str(ndoc["id"])
            if nid not in profiles:
                raise ValidationError(f"{profiles_path}: no profile rows for n-Grid {nid!r}")
            base_load, pv = profiles[nid]
            bess = None
            if "bess" in ndoc and ndoc["bess"] is not None:
                b = ndoc["bess"]
                bess = StorageUnit(capacity_kwh=float(b["capacity_kwh"]),
                                   p_max_kw=float(b["p_max_kw"]),
                                   soc_kwh=float(b.get("soc0_kwh", b["capacity_kwh"])),
                                   eta_charge=float(b.get("eta_charge", 1.0)),
                                   eta_discharge=float(b.get("eta_discharge", 1.0)))
            evs = []
            for edoc in ndoc.get("evs", []) or []:
                battery = StorageUnit(capacity_kwh=float(edoc["capacity_kwh"]),
                                      p_max_kw=float(edoc["p_max_kw"]),
                                      soc_kwh=float(edoc["soc_arrival_kwh"]),
                                      eta_charge=float(edoc.get("eta_charge", 1.0)),
                                      eta_discharge=float(edoc.get("eta_discharge", 1.0)))
                evs.append(ElectricVehicle(battery=battery,
                                           plug_hours=frozenset(parse_plug_hours(edoc["plug_hours"])),
                                           soc_on_arrival_kwh=float(edoc["soc_arrival_kwh"])))
            hvac = None
            if "hvac" in ndoc and ndoc["hvac"] is not None:
                hdoc = ndoc["hvac"]
                hvac = HvacAsset(p_normal_kw=_profile(hdoc["p_normal"], horizon, f"n-Grid {nid} hvac"),
                                 p_min_kw=_profile(hdoc["p_min"], horizon, f"n-Grid {nid} hvac"))
            tasks = []
            for tdoc in ndoc.get("deferrables", []) or []:
                tasks.append(DeferrableTask(energy_kwh=float(tdoc["energy_kwh"]),
                                            power_kw=float(tdoc["power_kw"]),
                                            earliest_hour=int(tdoc["earliest"]),
                                            deadline_hour=int(tdoc["deadline"])))
            ngrids.append(NGrid(id=nid, feeder_id=feeder_id, base_load=base_load, pv=pv,
                                bess=bess, evs=tuple(evs), hvac=hvac, deferrables=tuple(tasks)))
            ngrid_ids.append(nid)
        feeders.append(Feeder(id=feeder_id, ngrid_ids=tuple(ngrid_ids)))
    return Fleet(feeders=tuple(feeders), ngrids=tuple(ngrids))


def load_derate(path) -> dict[tuple[str, int], float]:
    derate: dict[tuple[str, int], float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"feeder_id", "hour", "factor"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValidationError(f"{path}: expected header with columns {sorted(required)}")
        for rec in reader:
            derate[(rec["feeder_id"], int(rec["hour"]))] = float(rec["factor"])
    return derate


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a YAML mapping")
    base_dir = os.path.dirname(os.path.abspath(path))

    def resolve(key: str):
        if key not in doc:
            raise ValidationError(f"{path}: missing required key {key!r}")
        return os.path.join(base_dir, str(doc[key]))

    horizon = int(doc.get("horizon", 24))
    fleet = load_fleet(resolve("fleet"), resolve("profiles"), horizon)
    sor = load_sor_table(resolve("sor"))
    derate = None
    if doc.get("derate"):
        derate = load_derate(os.path.join(base_dir, str(doc["derate"])))
    return Scenario(
        fleet=fleet,
        sor=sor,
        horizon=horizon,
        repair_hours=float(doc.get("repair_hours", 1.0)),
        replications=int(doc.get("replications", 1)),
        master_seed=int(doc.get("seed", 0)),
        sr_delivery_hours=float(doc.get("sr_delivery_hours", 1.0)),
        derate=derate,
        precharge=str(doc.get("precharge", "full")),
    )
