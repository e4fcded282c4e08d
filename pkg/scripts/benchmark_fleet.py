"""Time the full pipeline on a large synthetic fleet.

Default shape: 10,000 machines, 168 hours, 50 users, 20 clusters.
"""

import argparse
import time

from carbonledger.check import closure_failures, run_end_to_end
from carbonledger.simulate import ScenarioSpec, generate


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--machines", type=int, default=10_000)
    parser.add_argument("--hours", type=int, default=168)
    parser.add_argument("--users", type=int, default=50)
    parser.add_argument("--clusters", type=int, default=20)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    spec = ScenarioSpec(
        seed=args.seed,
        machine_count=args.machines,
        user_count=args.users,
        cluster_count=args.clusters,
        hours=args.hours,
    )
    started = time.perf_counter()
    bundle = generate(spec)
    generated = time.perf_counter()
    print(
        f"generated {len(bundle.power_samples):,} samples / "
        f"{len(bundle.gcu_usage):,} usage rows in {generated - started:.1f}s"
    )

    artifacts = run_end_to_end(bundle)
    processed = time.perf_counter()
    failures = closure_failures(bundle, artifacts)
    checked = time.perf_counter()

    print(f"pipeline + emissions + footprints: {processed - generated:.1f}s")
    print(f"closure checks: {checked - processed:.1f}s ({len(failures)} failure(s))")
    print(f"end-to-end processing: {checked - generated:.1f}s")
    print(
        f"allocated {artifacts.allocation.final.total_wh() / 1e6:,.1f} MWh, "
        f"{artifacts.emissions.total_kg():,.0f} kgCO2e, "
        f"{len(artifacts.footprints.reports)} footprint rows"
    )


if __name__ == "__main__":
    main()
