"""Regenerate the bundled synthetic transaction fixture.

Three users drawn from the 3-type cascade scenario (background-driven
"grocery" with self-excitation, grocery -> restaurant -> fuel), floored to
day granularity and written as ISO dates.  Run from the repository root:

    python3 tests/data/make_fixture.py
"""

import datetime
from pathlib import Path

import numpy as np

from periodic_hawkes import HawkesParams, normalize_delta, simulate

HORIZON = 420.0
LABELS = ["grocery", "restaurant", "fuel"]
START = datetime.date(2024, 1, 1)


def main() -> None:
    excitation = np.zeros((3, 3))
    excitation[0, 0] = 0.5
    excitation[0, 1] = 0.5
    excitation[1, 2] = 0.5
    delta = normalize_delta(np.array([1.3, 1.1, 1.0, 0.9, 0.8, 1.2, 0.7]))
    rows = []
    for k, seed in enumerate([11, 23, 47]):
        params = HawkesParams(
            mu=np.array([0.18 + 0.04 * k, 0.0, 0.0]),
            delta=delta,
            excitation=excitation,
            omega=1.0,
        )
        seq = simulate(params, HORIZON, seed=seed)
        for t, u in zip(seq.times, seq.types):
            date = START + datetime.timedelta(days=int(t))
            rows.append(f"user{k + 1},{date.isoformat()},{LABELS[int(u)]}")
    out = Path(__file__).with_name("transactions.csv")
    out.write_text("user,date,type\n" + "\n".join(rows) + "\n", encoding="utf-8")
    print(f"wrote {len(rows)} rows to {out}")


if __name__ == "__main__":
    main()
