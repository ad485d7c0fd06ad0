"""
Example: how h_(p) sharpens the min-max landscape of one random instance
"""

from prettytable import PrettyTable

from moqa.ensemble import sample_instance
from moqa.spectra import landscape_rows, recommended_p, verify_theorem


def run():
    mo = sample_instance(6, 120.0, 11)
    # large p overflows float64 on wide landscapes
    p = min(recommended_p(mo), 16)
    report = verify_theorem(mo, p)
    print(f"r_max={report.r_max:.4g}  p0={report.p0:.4g}  using p={p}")

    p_values = sorted({1, 2, p})
    rows = landscape_rows(mo, p_values)
    rows.sort(key=lambda row: row["h_max"])

    t = PrettyTable(["bits", "h_max"] + ["root p=%d" % q for q in p_values])
    t.align = "l"
    # lowest ten assignments are enough to see the ordering
    for row in rows[:10]:
        t.add_row([row["bits"], "%.4f" % row["h_max"]] + ["%.4f" % row["hp_root_%d" % q] for q in p_values])
    print(t)

    print("same ground space:", report.same_ground_space)
    for failure in report.violations():
        print("violated:", failure)


if __name__ == "__main__":
    run()
