"""Download the calibration inputs into data/ (needs internet access).

Writes data/dow_jones_1974_2023.csv (date, close) from Stooq and
data/tbill_1y_2022_2023.csv (date, rate) from the FRED DGS1 series. The rate
is converted from percent to a decimal and missing observations are dropped.
"""
import argparse
import csv
import io
import sys
import urllib.request
from pathlib import Path

DOW = "https://stooq.com/q/d/l/?s=^dji&d1=19740101&d2=20231231&i=d"
TBILL = "https://fred.stlouisfed.org/graph/fredgraph.csv?id=DGS1&cosd=2022-01-01&coed=2023-12-31"


def fetch(url: str) -> list[dict]:
    with urllib.request.urlopen(url, timeout=60) as resp:
        return list(csv.DictReader(io.StringIO(resp.read().decode())))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default=str(Path(__file__).resolve().parents[1] / "data"))
    out = Path(ap.parse_args().out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prices = fetch(DOW)
    with open(out / "dow_jones_1974_2023.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "close"])
        for row in prices:
            w.writerow([row["Date"], row["Close"]])
    rates = fetch(TBILL)
    key = next(k for k in rates[0] if k.upper() != "DATE" and k != "observation_date") if rates else "DGS1"
    date_key = "observation_date" if rates and "observation_date" in rates[0] else "DATE"
    with open(out / "tbill_1y_2022_2023.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "rate"])
        for row in rates:
            if row[key] not in ("", "."):
                w.writerow([row[date_key], float(row[key]) / 100])
    print(f"wrote {len(prices)} prices and {len(rates)} rate rows to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
