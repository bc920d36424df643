"""Run every bundled configuration and write its outputs under results/<name>/.

    python3 scripts/run_configs.py [--only NAME ...] [--results DIR]
"""

import argparse
import json
from pathlib import Path

from smfg.cli import NumericalFailure, run
from smfg.config import load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--only", nargs="*", help="config stems to run (default: all)")
    parser.add_argument("--results", type=Path, default=ROOT / "results")
    args = parser.parse_args()

    for path in sorted((ROOT / "configs").glob("*.json")):
        if args.only and path.stem not in args.only:
            continue
        spec = load_config(path)
        out = args.results / path.stem
        try:
            report = run(spec, out)
        except NumericalFailure as exc:
            print(f"{path.stem:16s} numerical failure: {exc}")
            continue
        line = (f"{path.stem:16s} {report['reason']:8s} t={report['final_time']:<8.4g} "
                f"residual {report['residual']['max']:.2e}  Hbar {report['hbar']:.8f}  "
                f"{report['wall_time_s']:6.1f}s")
        if "errors" in report:
            e = report["errors"]
            line += f"  u_err {e['u_linf']:.2e}  m_err {e['m_linf']:.2e}  hbar_err {e['hbar_err']:.2e}"
        if "density_form_check" in report:
            line += "  " + json.dumps(report["density_form_check"])
        print(line, flush=True)


if __name__ == "__main__":
    main()
