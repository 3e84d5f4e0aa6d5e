"""Tally wireless frames by cast from one or more frame logs.

    python scripts/purity_check.py results/runs/*/frames.log
"""

import sys
from pathlib import Path

from vndnsim.results import tally_frame_log


def main(paths: list[str]) -> int:
    status = 0
    for p in paths:
        counts = tally_frame_log(Path(p))
        bcast, ucast = counts[("wireless", "broadcast")], counts[("wireless", "unicast")]
        mixed = bcast and ucast
        status |= bool(mixed)
        print(f"{p}: broadcast={bcast} unicast={ucast}{'  MIXED' if mixed else ''}")
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
