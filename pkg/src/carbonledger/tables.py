"""CSV schemas for input bundles and report outputs.

CSV was chosen for diff-ability and language neutrality. Writers sort
rows by their key columns and format numbers with shortest round-trip
precision, so identical data always serializes to identical bytes.
Report rounding happens here at serialization time only.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InputError
from .model import (
    AnnualIntensityRecord,
    Bundle,
    CarbonIntensityRecord,
    GcuUsageRecord,
    MachineRecord,
    NetCostRecord,
    NonServiceCostRecord,
    PowerSample,
    PueRecord,
    ResourceAllocationRecord,
    ResourceVector,
    ServiceUsageRecord,
    Sharing,
    SkuRecord,
    SkuUsageRecord,
    Violation,
    ZoneMapRow,
    format_hour,
    parse_hour,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"

SCHEMAS: dict[str, tuple[str, ...]] = {
    "machines": ("machine_id", "cluster_id", "sharing", "owner_user", "idle_rating_watts"),
    "power_samples": ("machine_id", "hour_utc", "measured_power_watts"),
    "resource_allocations": ("user", "cluster_id", "hour_utc", "gcu", "ram_gib", "ssd_tib", "hdd_tib"),
    "gcu_usage": ("user", "machine_id", "hour_utc", "gcu_used"),
    "service_usage": (
        "consumer", "provider", "cluster_id", "hour_utc",
        "gcu", "ram_gib", "ssd_tib", "hdd_tib", "colossus_style",
    ),
    "net_cost": ("user", "service", "day_utc", "net_cost"),
    "non_service_cost": ("user", "day_utc", "cost"),
    "pue": ("cluster_id", "hour_utc", "pue"),
    "carbon_intensity": ("zone_id", "hour_utc", "g_per_kwh"),
    "annual_intensity": ("zone_id", "year", "g_per_kwh"),
    "zone_map": ("cluster_id", "zone_id", "region_id"),
    "sku_catalog": (
        "sku_id", "product_id", "provider_user", "list_price_per_unit", "usage_unit", "is_commitment",
    ),
    "billing_usage": ("sku_id", "region_id", "billing_account", "month", "usage_units"),
}

REQUIRED_TABLES = ("machines", "power_samples", "zone_map")


def _fmt(value: float) -> str:
    return repr(float(value))


def _fmt_bool(value: bool) -> str:
    return "true" if value else "false"


def _parse_bool(text: str) -> bool:
    if text in ("true", "True", "1"):
        return True
    if text in ("false", "False", "0", ""):
        return False
    raise InputError(f"cannot parse boolean {text!r}")


def _parse_day(text: str) -> date:
    return date.fromisoformat(text)


def quantize(value: float, step: float) -> float:
    """Round to a multiple of ``step``; a step of 0 disables rounding."""
    if step <= 0.0:
        return value
    return round(value / step) * step


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: Path, table: str) -> list[dict[str, str]]:
    expected = SCHEMAS[table]
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != expected:
            raise InputError(
                f"{path.name}: header {reader.fieldnames} does not match schema {list(expected)}"
            )
        return list(reader)


def write_bundle(bundle: Bundle, directory: Path, manifest_extra: dict | None = None) -> Path:
    """Serialize every input table plus a manifest with content hashes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    _write_csv(
        directory / "machines.csv",
        SCHEMAS["machines"],
        sorted(
            (m.machine_id, m.cluster_id, m.sharing.value, m.owner_user or "", _fmt(m.idle_rating_watts))
            for m in bundle.machines
        ),
    )
    _write_csv(
        directory / "power_samples.csv",
        SCHEMAS["power_samples"],
        sorted((s.machine_id, format_hour(s.hour), _fmt(s.measured_power_watts)) for s in bundle.power_samples),
    )
    _write_csv(
        directory / "resource_allocations.csv",
        SCHEMAS["resource_allocations"],
        sorted(
            (
                a.user, a.cluster_id, format_hour(a.hour),
                _fmt(a.allocation.gcu), _fmt(a.allocation.ram_gib),
                _fmt(a.allocation.ssd_tib), _fmt(a.allocation.hdd_tib),
            )
            for a in bundle.resource_allocations
        ),
    )
    _write_csv(
        directory / "gcu_usage.csv",
        SCHEMAS["gcu_usage"],
        sorted((u.user, u.machine_id, format_hour(u.hour), _fmt(u.gcu_used)) for u in bundle.gcu_usage),
    )
    _write_csv(
        directory / "service_usage.csv",
        SCHEMAS["service_usage"],
        sorted(
            (
                s.consumer, s.provider, s.cluster_id, format_hour(s.hour),
                _fmt(s.usage.gcu), _fmt(s.usage.ram_gib), _fmt(s.usage.ssd_tib), _fmt(s.usage.hdd_tib),
                _fmt_bool(s.colossus_style),
            )
            for s in bundle.service_usage
        ),
    )
    _write_csv(
        directory / "net_cost.csv",
        SCHEMAS["net_cost"],
        sorted((n.user, n.service, n.day.isoformat(), _fmt(n.net_cost)) for n in bundle.net_costs),
    )
    _write_csv(
        directory / "non_service_cost.csv",
        SCHEMAS["non_service_cost"],
        sorted((n.user, n.day.isoformat(), _fmt(n.cost)) for n in bundle.non_service_costs),
    )
    _write_csv(
        directory / "pue.csv",
        SCHEMAS["pue"],
        sorted((p.cluster_id, format_hour(p.hour), _fmt(p.pue)) for p in bundle.pue),
    )
    _write_csv(
        directory / "carbon_intensity.csv",
        SCHEMAS["carbon_intensity"],
        sorted((c.zone_id, format_hour(c.hour), _fmt(c.intensity_g_per_kwh)) for c in bundle.carbon_intensity),
    )
    _write_csv(
        directory / "annual_intensity.csv",
        SCHEMAS["annual_intensity"],
        sorted((a.zone_id, str(a.year), _fmt(a.intensity_g_per_kwh)) for a in bundle.annual_intensity),
    )
    _write_csv(
        directory / "zone_map.csv",
        SCHEMAS["zone_map"],
        sorted((z.cluster_id, z.zone_id or "", z.region_id) for z in bundle.zone_map),
    )
    _write_csv(
        directory / "sku_catalog.csv",
        SCHEMAS["sku_catalog"],
        sorted(
            (s.sku_id, s.product_id, s.provider_user, _fmt(s.list_price_per_unit), s.usage_unit,
             _fmt_bool(s.is_commitment))
            for s in bundle.sku_catalog
        ),
    )
    _write_csv(
        directory / "billing_usage.csv",
        SCHEMAS["billing_usage"],
        sorted(
            (b.sku_id, b.region_id, b.billing_account or "", b.month, _fmt(b.usage_units))
            for b in bundle.billing_usage
        ),
    )

    hashes = {
        f"{table}.csv": hashlib.sha256((directory / f"{table}.csv").read_bytes()).hexdigest()
        for table in sorted(SCHEMAS)
    }
    manifest = {"schema_version": SCHEMA_VERSION, "files": hashes}
    manifest.update(manifest_extra or {})
    manifest_path = directory / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def read_bundle(directory: Path) -> Bundle:
    """Load a bundle directory; non-required tables may be absent."""
    directory = Path(directory)
    for table in REQUIRED_TABLES:
        if not (directory / f"{table}.csv").exists():
            raise InputError(f"required input file {table}.csv missing from {directory}")

    def rows(table: str) -> list[dict[str, str]]:
        path = directory / f"{table}.csv"
        if not path.exists():
            return []
        return _read_csv(path, table)

    bundle = Bundle()
    for r in rows("machines"):
        bundle.machines.append(
            MachineRecord(
                r["machine_id"], r["cluster_id"], Sharing(r["sharing"]),
                r["owner_user"] or None, float(r["idle_rating_watts"]),
            )
        )
    for r in rows("power_samples"):
        bundle.power_samples.append(
            PowerSample(r["machine_id"], parse_hour(r["hour_utc"]), float(r["measured_power_watts"]))
        )
    for r in rows("resource_allocations"):
        bundle.resource_allocations.append(
            ResourceAllocationRecord(
                r["user"], r["cluster_id"], parse_hour(r["hour_utc"]),
                ResourceVector(float(r["gcu"]), float(r["ram_gib"]), float(r["ssd_tib"]), float(r["hdd_tib"])),
            )
        )
    for r in rows("gcu_usage"):
        bundle.gcu_usage.append(
            GcuUsageRecord(r["user"], r["machine_id"], parse_hour(r["hour_utc"]), float(r["gcu_used"]))
        )
    for r in rows("service_usage"):
        bundle.service_usage.append(
            ServiceUsageRecord(
                r["consumer"], r["provider"], r["cluster_id"], parse_hour(r["hour_utc"]),
                ResourceVector(float(r["gcu"]), float(r["ram_gib"]), float(r["ssd_tib"]), float(r["hdd_tib"])),
                _parse_bool(r["colossus_style"]),
            )
        )
    for r in rows("net_cost"):
        bundle.net_costs.append(
            NetCostRecord(r["user"], r["service"], _parse_day(r["day_utc"]), float(r["net_cost"]))
        )
    for r in rows("non_service_cost"):
        bundle.non_service_costs.append(
            NonServiceCostRecord(r["user"], _parse_day(r["day_utc"]), float(r["cost"]))
        )
    for r in rows("pue"):
        bundle.pue.append(PueRecord(r["cluster_id"], parse_hour(r["hour_utc"]), float(r["pue"])))
    for r in rows("carbon_intensity"):
        bundle.carbon_intensity.append(
            CarbonIntensityRecord(r["zone_id"], parse_hour(r["hour_utc"]), float(r["g_per_kwh"]))
        )
    for r in rows("annual_intensity"):
        bundle.annual_intensity.append(
            AnnualIntensityRecord(r["zone_id"], int(r["year"]), float(r["g_per_kwh"]))
        )
    for r in rows("zone_map"):
        bundle.zone_map.append(ZoneMapRow(r["cluster_id"], r["zone_id"] or None, r["region_id"]))
    for r in rows("sku_catalog"):
        bundle.sku_catalog.append(
            SkuRecord(
                r["sku_id"], r["product_id"], r["provider_user"],
                float(r["list_price_per_unit"]), r["usage_unit"], _parse_bool(r["is_commitment"]),
            )
        )
    for r in rows("billing_usage"):
        bundle.billing_usage.append(
            SkuUsageRecord(
                r["sku_id"], r["region_id"], r["billing_account"] or None, r["month"],
                float(r["usage_units"]),
            )
        )
    return bundle


def write_validation_report(violations: Sequence[Violation], path: Path) -> None:
    _write_csv(Path(path), ("code", "subject", "detail"), [(v.code, v.subject, v.detail) for v in violations])


def write_user_energy(stages, path: Path, energy_step: float = 1.0) -> None:
    """Final ledger with one total column per pipeline stage."""
    final = stages[-1]
    header = ["user", "cluster_id", "hour_utc", "idle_wh", "dynamic_wh"]
    header.extend(f"{ledger.stage}_wh" for ledger in stages)
    keys = sorted({key for ledger in stages for key in ledger.cells})
    rows = []
    for key in keys:
        user, cluster, hour = key
        cell = final.cells.get(key)
        row = [
            user, cluster, format_hour(hour),
            _fmt(quantize(cell.idle_wh if cell else 0.0, energy_step)),
            _fmt(quantize(cell.dynamic_wh if cell else 0.0, energy_step)),
        ]
        for ledger in stages:
            stage_cell = ledger.cells.get(key)
            row.append(_fmt(quantize(stage_cell.total_wh if stage_cell else 0.0, energy_step)))
        rows.append(row)
    _write_csv(Path(path), header, rows)


def write_emissions(records, path: Path, energy_step: float = 1.0, carbon_step_g: float = 1.0) -> None:
    rows = [
        (
            r.user, r.cluster_id, format_hour(r.hour),
            _fmt(quantize(r.energy_it_wh, energy_step)),
            _fmt(quantize(r.energy_total_wh, energy_step)),
            _fmt(quantize(r.kg_co2e, carbon_step_g / 1000.0)),
            r.intensity_source.value,
        )
        for r in sorted(records, key=lambda r: (r.user, r.cluster_id, r.hour))
    ]
    _write_csv(
        Path(path),
        ("user", "cluster_id", "hour_utc", "energy_it_wh", "energy_total_wh", "kg_co2e", "intensity_source"),
        rows,
    )


def write_footprints(reports, path: Path, carbon_step_g: float = 1.0) -> None:
    rows = [
        (
            r.billing_account, r.product_id, r.region_id, r.month,
            _fmt(quantize(r.kg_co2e, carbon_step_g / 1000.0)), _fmt(r.beta),
        )
        for r in sorted(reports, key=lambda r: (r.billing_account, r.product_id, r.region_id, r.month))
    ]
    _write_csv(
        Path(path),
        ("billing_account", "product_id", "region_id", "month", "kg_co2e", "beta"),
        rows,
    )


def write_flow_summary(stages, path: Path, energy_step: float = 1.0) -> None:
    """Per-stage per-user totals plus one TOTAL row per stage.

    The TOTAL rows carry the same energy at every stage: reallocation
    moves energy between users, never in or out of the system.
    """
    rows: list[tuple[str, str, str]] = []
    for ledger in stages:
        totals = ledger.totals_by_user()
        for user in sorted(totals):
            rows.append((ledger.stage, user, _fmt(quantize(totals[user], energy_step))))
        rows.append((ledger.stage, "TOTAL", _fmt(quantize(sum(totals.values()), energy_step))))
    _write_csv(Path(path), ("stage", "user", "energy_wh"), rows)
