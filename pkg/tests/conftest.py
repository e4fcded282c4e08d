from datetime import datetime, timedelta, timezone

import pytest

from carbonledger.model import (
    MachineRecord,
    PowerSample,
    ResourceAllocationRecord,
    ResourceVector,
    Sharing,
    ZoneMapRow,
    ClusterTopology,
)

HOUR0 = datetime(2023, 6, 5, 0, 0, tzinfo=timezone.utc)


def H(index: int) -> datetime:
    """The index-th hour of the shared test day."""
    return HOUR0 + timedelta(hours=index)


def shared_machine(machine_id="m0", cluster="c0", idle=100.0) -> MachineRecord:
    return MachineRecord(machine_id, cluster, Sharing.SHARED, None, idle)


def dedicated_machine(machine_id="m0", cluster="c0", owner="alice", idle=100.0) -> MachineRecord:
    return MachineRecord(machine_id, cluster, Sharing.DEDICATED, owner, idle)


def sample(machine_id="m0", hour_index=0, watts=100.0) -> PowerSample:
    return PowerSample(machine_id, H(hour_index), watts)


def alloc(user, cluster="c0", hour_index=0, **vector) -> ResourceAllocationRecord:
    return ResourceAllocationRecord(user, cluster, H(hour_index), ResourceVector(**vector))


@pytest.fixture
def topology_one_cluster() -> ClusterTopology:
    return ClusterTopology.from_rows([ZoneMapRow("c0", "z0", "r0")])


@pytest.fixture
def topology_two_clusters() -> ClusterTopology:
    return ClusterTopology.from_rows(
        [ZoneMapRow("c0", "z0", "r0"), ZoneMapRow("c1", "z1", "r1")]
    )
