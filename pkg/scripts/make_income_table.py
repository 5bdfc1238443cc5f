#!/usr/bin/env python3
"""Regenerate data/income_synthetic.csv.

The table is synthetic: bin shares are hand-chosen to mimic the broad
shape of US household income distributions by race (clear cross-race
differences at the low end, a heavier top bin for the highest-income
group) with a mild upward drift over 2002-2020. It is NOT census data.
"""

import os

YEARS = range(2002, 2021)
RACES = ["BLACK ALONE", "WHITE ALONE", "ASIAN ALONE"]

# bin edges in K$; the last bin is open-top (empty upper bound in the CSV)
EDGES = [0, 10, 15, 25, 50, 75, 100, 150, 200]

# shares at the endpoints of the horizon; linear interpolation in between
SHARES_2002 = {
    "BLACK ALONE": [0.080, 0.100, 0.170, 0.300, 0.160, 0.090, 0.060, 0.020, 0.020],
    "WHITE ALONE": [0.030, 0.050, 0.120, 0.270, 0.190, 0.120, 0.120, 0.050, 0.050],
    "ASIAN ALONE": [0.030, 0.040, 0.090, 0.220, 0.170, 0.130, 0.150, 0.080, 0.090],
}
SHARES_2020 = {
    "BLACK ALONE": [0.050, 0.070, 0.130, 0.260, 0.180, 0.110, 0.110, 0.050, 0.040],
    "WHITE ALONE": [0.020, 0.030, 0.080, 0.210, 0.180, 0.130, 0.150, 0.090, 0.110],
    "ASIAN ALONE": [0.020, 0.025, 0.060, 0.160, 0.150, 0.130, 0.170, 0.110, 0.185],
}


def interpolated_shares(race, year):
    t = (year - 2002) / (2020 - 2002)
    a, b = SHARES_2002[race], SHARES_2020[race]
    raw = [(1 - t) * ai + t * bi for ai, bi in zip(a, b)]
    total = sum(raw)
    shares = [round(s / total, 6) for s in raw]
    shares[-1] = round(shares[-1] + (1.0 - sum(shares)), 6)  # force exact sum 1
    return shares


def main():
    out = os.path.join(os.path.dirname(__file__), "..", "data", "income_synthetic.csv")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("year,race,bin_lower,bin_upper,share\n")
        for year in YEARS:
            for race in RACES:
                shares = interpolated_shares(race, year)
                for i, share in enumerate(shares):
                    lower = EDGES[i]
                    upper = "" if i == len(EDGES) - 1 else EDGES[i + 1]
                    fh.write(f"{year},{race},{lower},{upper},{share}\n")
    print(f"wrote {os.path.normpath(out)}")


if __name__ == "__main__":
    main()
