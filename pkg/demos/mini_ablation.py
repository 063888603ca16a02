"""Compare the four search variants on a common suite of landscapes.

Each variant attacks the same seeded synthetic landscapes under the same
query budget; the summary table shows how the fooling rate and the query
bill move as the regional probing and the adaptive criterion are switched
on. Reports land in an output directory as JSON and CSV.
"""

import argparse

from advsticker import ablation, emit_report, parse_attack_config


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="demo_out/ablation")
    parser.add_argument("--runs", type=int, default=12)
    parser.add_argument("--budget", type=int, default=2000)
    args = parser.parse_args()

    # two small weak bumps on a 96x96 grid: global moves alone rarely find
    # them, regional probing walks in, so the variant gaps show clearly
    config = parse_attack_config({
        "search": {"population_size": 10, "generations": 20},
        "oracle": {"kind": "synthetic", "rows": 96, "cols": 96, "n_bumps": 2,
                   "amplitude_range": [2.1, 2.4], "sigma_range": [2.5, 4.5]},
        "budget": args.budget,
        "batch_seed": 1,
        "images": {"count": args.runs},
    })
    report = ablation(config)
    paths = emit_report(report, args.out_dir)

    header = f"{'variant':<12} {'FR':>6} {'wins':>5} {'median NQ':>10} {'mean NQ':>9}"
    print(header)
    print("-" * len(header))
    for row in report["summary"]:
        fr = row["fooling_rate"]
        med = row["nq_median_success"]
        mean = row["nq_mean_success"]
        print(f"{row['variant']:<12} {fr:>6.2f} {row['successes']:>5} "
              f"{med if med is not None else '-':>10} "
              f"{f'{mean:.1f}' if mean is not None else '-':>9}")
    print(f"\nfull report: {paths['json']}")


if __name__ == "__main__":
    main()
