"""Run all acceptance checks on their default inputs; print one line each and optionally dump JSON."""

import argparse
import json

from waveop_lab import experiments as ex
from waveop_lab.potentials import square_well


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--json", help="write the results here")
    ap.add_argument("--skip-time-dependent", action="store_true", help="leave out criterion 9 (~70 s)")
    args = ap.parse_args()

    p = square_well(4, 1)
    studies = (ex.remainder_study(p, 0, 256), ex.remainder_study(p, 0, 512))
    runs = [
        lambda: ex.check_cross_solver(),
        lambda: ex.check_closed_form(),
        lambda: ex.check_unitarity(),
        lambda: ex.check_exact_vs_eigen(),
        lambda: ex.check_remainder(p, 0, 256, studies=studies),
        lambda: ex.check_functional_calculus(),
        lambda: ex.check_commutator_rank(),
        lambda: ex.check_trace_bounds(),
        None if args.skip_time_dependent else (lambda: ex.check_time_dependent()),
        lambda: ex.check_levinson(),
        lambda: ex.check_w_plus(p, 0, 256, studies=studies),
    ]
    out = {}
    for run in runs:
        if run is None:
            continue
        r = run()
        print(r.line(), flush=True)
        out[r.key] = r.as_json()
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
