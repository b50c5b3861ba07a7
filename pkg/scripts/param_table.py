"""Print the parameter count of every kernel preset at its table width."""

import argparse

from brepnet.model import ArchitectureConfig, parameter_count

WIDTHS = {
    "simple_edge": 120,
    "asymmetric": 120,
    "asymmetric_plus": 113,
    "asymmetric_plus_plus": 107,
    "winged_edge": 84,
    "winged_edge_plus": 75,
    "winged_edge_plus_plus": 63,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-T", "--num-units", type=int, default=1)
    args = ap.parse_args()
    print(f"{'kernel':24s} {'s':>4s} {'params':>9s}")
    for name, s in WIDTHS.items():
        n = parameter_count(ArchitectureConfig(kernel=name, hidden=s, num_units=args.num_units))
        print(f"{name:24s} {s:4d} {n:9,d}")


if __name__ == "__main__":
    main()
