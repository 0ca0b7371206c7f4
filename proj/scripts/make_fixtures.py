#!/usr/bin/env python3
"""Regenerates the trajectory fixtures and suite manifests under fixtures/.

The suites are deterministic functions of the constants below; rerunning the
script reproduces the shipped files byte for byte.
"""

import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
TRAJ = ROOT / "trajectories"
SUITES = ROOT / "suites"


def act(move="none", yaw=0, pitch=0, repeat=None):
    a = {"move": move, "yaw": yaw, "pitch": pitch}
    if repeat is not None:
        a["repeat"] = repeat
    return a


def write_trajectory(name, actions, start=None):
    TRAJ.mkdir(parents=True, exist_ok=True)
    data = {"name": name, "actions": actions}
    if start is not None:
        data["start"] = start
    path = TRAJ / f"{name}.json"
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path


def write_suite(name, entries):
    SUITES.mkdir(parents=True, exist_ok=True)
    data = {
        "name": name,
        "trajectories": [
            {"scene_seed": seed, "path": f"../trajectories/{traj}.json"}
            for seed, traj in entries
        ],
    }
    (SUITES / f"{name}.json").write_text(json.dumps(data, indent=2) + "\n")


def start_at(x, y):
    return {"tx": float(x), "ty": float(y)}


def pan_return():
    """Turn right x4, stop, turn left x4, stop, turn right (11 chunks)."""
    actions = [act(yaw=1, repeat=4), act(), act(yaw=-1, repeat=4), act(), act(yaw=1)]
    write_trajectory("pan_return", actions, start_at(12, 12))


def loop_closure_suite():
    """Repeated pan circles: every circle after the first revisits each view.

    Three yaw steps per chunk walk the heading around the full 22.5-degree
    lattice once every 16 chunks, so revisits sit far outside the recent
    window and consecutive views barely overlap.
    """
    entries = []
    for i in range(10):
        direction = 1 if i % 2 == 0 else -1
        name = f"loop_pan675_{i}"
        write_trajectory(name, [act(yaw=3 * direction, repeat=48)], start_at(12, 12))
        entries.append((i, name))
    write_suite("loop_closure", entries)


def forward_backward():
    """Out, about-face, back, about-face, out again along one corridor."""
    actions = [
        act("forward", repeat=6),
        act(yaw=4, repeat=2),  # 180 degree turn
        act("forward", repeat=6),
        act(yaw=4, repeat=2),
        act("forward", repeat=6),
    ]
    write_trajectory("forward_backward", actions, start_at(12, 6))


def station_pan(offset_sign=0):
    """One full pan lap; optionally started half a chunk-step off the lattice."""
    lap = []
    if offset_sign:
        lap.append(act(yaw=offset_sign))
    lap.append(act(yaw=4, repeat=4))
    if offset_sign:
        lap.append(act(yaw=-offset_sign))
    return lap


def long_revisit_suite():
    """Station walks with pan laps; later laps revisit off the stored lattice.

    First visits pan each station on a 90-degree lattice. The revisit phase
    pans the same stations offset by one yaw step, so no stored chunk matches
    a revisit view exactly and recall depends on both the retained non-anchor
    tokens and the breadth of the retrieval budget.
    """
    entries = []
    for i in range(10):
        offset = 1 if i % 2 == 0 else -1
        walk = 4 if i % 3 else 5
        name = f"revisit_stations_{i}"
        actions = []
        actions += station_pan()                      # station A, first visit
        actions.append(act("forward", repeat=walk))   # A -> B
        actions += station_pan()                      # station B
        actions.append(act("forward", repeat=walk))   # B -> C
        actions += station_pan()                      # station C
        actions.append(act("back", repeat=2 * walk))  # C -> A without turning
        actions += station_pan(offset)                # A again, off-lattice
        actions.append(act("forward", repeat=walk))
        actions += station_pan(offset)                # B again, off-lattice
        actions.append(act("forward", repeat=walk))
        actions += station_pan(offset)                # C again, off-lattice
        write_trajectory(name, actions, start_at(12, 5))
        entries.append((100 + i, name))
    write_suite("long_revisit", entries)


def multi_revisit():
    """Interleaved pans and walks hitting each area three times."""
    actions = []
    for _ in range(3):
        actions += [act(yaw=2, repeat=8)]      # pan lap at the near station
        actions += [act("forward", repeat=4)]  # out
        actions += [act(yaw=2, repeat=8)]      # pan lap at the far station
        actions += [act("back", repeat=4)]     # home
    write_trajectory("multi_revisit", actions, start_at(12, 8))


def main():
    pan_return()
    loop_closure_suite()
    forward_backward()
    long_revisit_suite()
    multi_revisit()
    print(f"fixtures written under {ROOT}")


if __name__ == "__main__":
    main()
