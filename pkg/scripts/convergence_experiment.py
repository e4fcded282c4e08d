"""Measure how quickly net-cost reallocation settles across rounds.

Runs the pipeline with extra minor rounds on acyclic economies and
reports the energy moved per round plus the round-3/round-1 ratio. On
two-hop chains with cost-recovering providers the third round should move
well under 1% of the first.
"""

import argparse

from carbonledger.services import run_allocation_pipeline
from carbonledger.simulate import ScenarioSpec, generate, preset_spec


def run_case(name: str, bundle, rounds: int) -> None:
    result = run_allocation_pipeline(bundle, rounds=rounds)
    moved = result.round_moved_wh
    ratio = moved[2] / moved[0] if rounds >= 3 and moved[0] > 0 else float("nan")
    pretty = ", ".join(f"r{i + 1}={m / 1e6:.3f}MWh" for i, m in enumerate(moved))
    print(f"{name:<22} {pretty}  round3/round1={ratio:.2e}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rounds", type=int, default=4)
    parser.add_argument("--seeds", type=int, default=5, help="random acyclic economies to sample")
    parser.add_argument("--cyclic", action="store_true", help="also show a cyclic economy")
    args = parser.parse_args()

    run_case("sankey-small", generate(preset_spec("sankey-small")), args.rounds)
    run_case("balanced-service", generate(preset_spec("balanced-service")), args.rounds)
    for seed in range(args.seeds):
        spec = ScenarioSpec(seed=300 + seed, machine_count=40, user_count=8, hours=24, economy_depth=2)
        run_case(f"random-acyclic-{seed}", generate(spec), args.rounds)
    if args.cyclic:
        spec = ScenarioSpec(seed=400, machine_count=40, user_count=8, hours=24, cyclic_economy=True)
        run_case("random-cyclic", generate(spec), args.rounds)


if __name__ == "__main__":
    main()
