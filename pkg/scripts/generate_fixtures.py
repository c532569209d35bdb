"""Regenerate the committed test/demo fixture CSVs (all seeded)."""

from pathlib import Path

from deepfolio.synthetic import geometric_walk_market, write_market_csv

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    out = ROOT / "tests" / "data"
    out.mkdir(parents=True, exist_ok=True)
    market = geometric_walk_market(4, 1200, seed=20120903, drift=1e-4, vol=0.012)
    write_market_csv(out / "market_4asset_1200d.csv", market)
    print("wrote", out / "market_4asset_1200d.csv")


if __name__ == "__main__":
    main()
