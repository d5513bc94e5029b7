#!/usr/bin/env python3
"""Download the Italian regional COVID-19 feed for offline use.

The library itself never touches the network: `seirctl ingest` reads a local
CSV (or stdin).  This helper grabs the official regional snapshot published
by the Dipartimento della Protezione Civile so you can feed it in:

    python3 scripts/fetch_regional_data.py --out data/regioni.csv
    seirctl ingest data/regioni.csv --preset paper-italy-2020 --out runs/italy

The full history file is a few tens of MB; pass --date to fetch a single
daily snapshot instead.  Not used by the test suite.
"""

from __future__ import annotations

import argparse
import sys
import urllib.error
import urllib.request

BASE = (
    "https://raw.githubusercontent.com/pcm-dpc/COVID-19/master/"
    "dati-regioni/dpc-covid19-ita-regioni{suffix}.csv"
)


def feed_url(date: str | None) -> str:
    """URL of the full history feed, or of one daily snapshot (YYYY-MM-DD)."""
    if date is None:
        return BASE.format(suffix="")
    return BASE.format(suffix="-" + date.replace("-", ""))


def fetch(url: str, out_path: str, timeout: float) -> int:
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            payload = resp.read()
    except urllib.error.URLError as exc:
        print(f"error: could not fetch {url}: {exc}", file=sys.stderr)
        return 1
    with open(out_path, "wb") as fh:
        fh.write(payload)
    print(f"wrote {len(payload)} bytes to {out_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="dpc-covid19-ita-regioni.csv",
                    help="output CSV path (default: %(default)s)")
    ap.add_argument("--date", default=None, metavar="YYYY-MM-DD",
                    help="fetch the snapshot for one day instead of the full history")
    ap.add_argument("--timeout", type=float, default=60.0,
                    help="HTTP timeout in seconds (default: %(default)s)")
    args = ap.parse_args(argv)
    return fetch(feed_url(args.date), args.out, args.timeout)


if __name__ == "__main__":
    raise SystemExit(main())
