"""Grid-refinement study on the Ornstein-Uhlenbeck grid.

Prints the Mehler gap, the best gradient-contractivity constant, the
integrated EVI residual and the Fisher defect per mesh size, and optionally
writes every report as JSON.

    python3 scripts/ou_refinement.py --hs 0.5 0.25 0.125 --out ou_refinement.json
"""

import argparse
import time

from mmlab import studies
from mmlab.io import write_json


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=float, default=4.0)
    ap.add_argument("--hs", type=float, nargs="+", default=list(studies.DEFAULT_HS))
    ap.add_argument("--evi-times", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4])
    ap.add_argument("--skip-evi", action="store_true", help="skip the (slow) EVI study")
    ap.add_argument("--out", help="write all reports to this JSON file")
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    reports = {
        "mehler": studies.mehler_refinement(args.L, args.hs),
        "bakry_emery": studies.be_refinement(args.L, args.hs),
        "fisher_defect": studies.fisher_defect_refinement(args.L, args.hs),
    }
    if not args.skip_evi:
        reports["evi"] = studies.evi_refinement(args.L, args.hs, tgrid=args.evi_times)

    columns = {
        "Mehler gap": reports["mehler"].extra["values"],
        "best K": reports["bakry_emery"].extra["best_K"],
        "Fisher defect": reports["fisher_defect"].extra["values"],
    }
    if "evi" in reports:
        columns["EVI certified"] = reports["evi"].extra["values"]
        columns["EVI pessimistic"] = reports["evi"].extra["pessimistic"]
    print(f"{'h':>8} " + " ".join(f"{name:>16}" for name in columns))
    for k, h in enumerate(args.hs):
        print(f"{h:>8.4g} " + " ".join(f"{col[k]:>16.6e}" for col in columns.values()))
    for name, rep in reports.items():
        print(f"{name:>14}: {'PASS' if rep.passed else 'FAIL'}")
    print(f"elapsed {time.perf_counter() - t0:.1f}s")
    if args.out:
        write_json(args.out, {k: r.to_dict() for k, r in reports.items()})
    return 0 if all(r.passed for r in reports.values()) else 1


if __name__ == "__main__":
    raise SystemExit(main())
