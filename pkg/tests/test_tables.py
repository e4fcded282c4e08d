import csv

import pytest

from carbonledger.errors import InputError
from carbonledger.simulate import ScenarioSpec, generate, preset_spec
from carbonledger.tables import (
    SCHEMAS,
    quantize,
    read_bundle,
    write_bundle,
)


def _sorted_records(bundle):
    return {
        "machines": sorted(bundle.machines, key=lambda m: m.machine_id),
        "power_samples": sorted(bundle.power_samples, key=lambda s: (s.machine_id, s.hour)),
        "resource_allocations": sorted(
            bundle.resource_allocations, key=lambda a: (a.user, a.cluster_id, a.hour)
        ),
        "gcu_usage": sorted(bundle.gcu_usage, key=lambda u: (u.user, u.machine_id, u.hour)),
        "service_usage": sorted(
            bundle.service_usage, key=lambda s: (s.consumer, s.provider, s.cluster_id, s.hour)
        ),
        "net_costs": sorted(bundle.net_costs, key=lambda n: (n.user, n.service, n.day)),
        "non_service_costs": sorted(bundle.non_service_costs, key=lambda n: (n.user, n.day)),
        "pue": sorted(bundle.pue, key=lambda p: (p.cluster_id, p.hour)),
        "carbon_intensity": sorted(bundle.carbon_intensity, key=lambda c: (c.zone_id, c.hour)),
        "annual_intensity": sorted(bundle.annual_intensity, key=lambda a: (a.zone_id, a.year)),
        "zone_map": sorted(bundle.zone_map, key=lambda z: z.cluster_id),
        "sku_catalog": sorted(bundle.sku_catalog, key=lambda s: s.sku_id),
        "billing_usage": sorted(
            bundle.billing_usage, key=lambda b: (b.sku_id, b.region_id, b.billing_account or "", b.month)
        ),
    }


def test_bundle_roundtrip_preserves_every_record(tmp_path):
    original = generate(
        ScenarioSpec(seed=5, machine_count=12, user_count=5, hours=6, include_unbilled_usage=True)
    )
    write_bundle(original, tmp_path)
    reloaded = read_bundle(tmp_path)
    assert _sorted_records(reloaded) == _sorted_records(original)


def test_written_headers_match_declared_schemas(tmp_path):
    write_bundle(generate(preset_spec("sankey-small")), tmp_path)
    for table, columns in SCHEMAS.items():
        with (tmp_path / f"{table}.csv").open(newline="") as handle:
            header = next(csv.reader(handle))
        assert tuple(header) == columns


def test_timestamps_use_hour_precision_utc(tmp_path):
    write_bundle(generate(preset_spec("figure1")), tmp_path)
    with (tmp_path / "power_samples.csv").open(newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert all(row["hour_utc"].endswith("Z") and len(row["hour_utc"]) == 17 for row in rows)


def test_missing_required_table_raises(tmp_path):
    write_bundle(generate(preset_spec("figure1")), tmp_path)
    (tmp_path / "machines.csv").unlink()
    with pytest.raises(InputError):
        read_bundle(tmp_path)


def test_missing_optional_table_defaults_empty(tmp_path):
    write_bundle(generate(preset_spec("figure1")), tmp_path)
    (tmp_path / "net_cost.csv").unlink()
    bundle = read_bundle(tmp_path)
    assert bundle.net_costs == []


def test_header_mismatch_raises(tmp_path):
    write_bundle(generate(preset_spec("figure1")), tmp_path)
    path = tmp_path / "pue.csv"
    lines = path.read_text().splitlines()
    lines[0] = "cluster,hour,value"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(InputError):
        read_bundle(tmp_path)


def test_quantize_steps():
    assert quantize(1234.4, 1.0) == 1234.0
    assert quantize(1234.6, 1.0) == 1235.0
    assert quantize(0.35288, 0.001) == pytest.approx(0.353)
    assert quantize(123.456, 0.0) == 123.456
