"""Sweep the broadcast (basic) rate and preamble and report native satisfaction.

Only the native instances depend on the basic service, so this is the knob
that places native-1 and native-2 relative to each other and to the overlay
runs. Each point runs both native instances on a few traces.

    python scripts/calibrate_basic_rate.py --traces 3 --horizon 300
"""

from __future__ import annotations

import argparse
import statistics

from vndnsim.config import Config, apply_overrides
from vndnsim.mobility import generate_trace
from vndnsim.scenarios import run_instance

POINTS = [(6.0, 20.0), (6.0, 96.0), (3.0, 96.0), (2.0, 96.0), (1.0, 192.0)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--traces", type=int, default=3)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--horizon", type=float, default=300.0)
    args = ap.parse_args()

    traces = [generate_trace(args.seed + k) for k in range(1, args.traces + 1)]
    print("basic_mbps,preamble_us,native1,native2,modified_over_cbr")
    for rate, preamble in POINTS:
        config = apply_overrides(Config(horizon_s=args.horizon), {
            "mac.basic_rate_mbps": str(rate), "mac.preamble_basic_us": str(preamble)})
        n1, n2, ratio = [], [], []
        for k, trace in enumerate(traces, start=1):
            m1 = run_instance("native-1", trace, k, 1, config)
            m2 = run_instance("native-2", trace, k, 1, config)
            n1.append(m1.total_received() / m1.total_sent())
            n2.append(m2.total_received() / m2.total_sent())
            per_app = {a: m2.data_received[a] / m2.interests_sent[a] for a in m2.apps()}
            ratio.append(per_app["modified"] / per_app["cbr"])
        print(f"{rate},{preamble},{statistics.fmean(n1):.4f},{statistics.fmean(n2):.4f},"
              f"{statistics.fmean(ratio):.2f}", flush=True)


if __name__ == "__main__":
    main()
