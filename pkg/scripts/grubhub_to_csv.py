"""Convert a public meal-delivery instance directory into modalprice CSVs.

The dataset is not bundled.  Download an instance directory (it contains
tab-separated ``orders.txt``, ``restaurants.txt``, ``couriers.txt`` and
``instance_parameters.txt`` with planar coordinates in metres), then run::

    python scripts/grubhub_to_csv.py INSTANCE_DIR OUT_DIR
    modalprice convert --orders OUT_DIR/orders.csv --couriers OUT_DIR/couriers.csv \
        --out instance.json

Columns are looked up by header name, so extra columns are ignored.  Every
courier row becomes a car courier; drones and robots are added by
``modalprice gen``-style sampling only, not by this script.
"""

import argparse
import csv
from pathlib import Path


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    header = [h.strip().lower() for h in rows[0]]
    return [dict(zip(header, (c.strip() for c in r))) for r in rows[1:] if r]


def convert(src: Path, dst: Path) -> tuple[int, int]:
    params = read_table(src / "instance_parameters.txt")[0]
    pickup_s = 60.0 * float(params["pickup service minutes"])
    dropoff_s = 60.0 * float(params["dropoff service minutes"])
    restaurants = {r["restaurant"]: (r["x"], r["y"]) for r in read_table(src / "restaurants.txt")}
    orders = read_table(src / "orders.txt")
    couriers = read_table(src / "couriers.txt")
    dst.mkdir(parents=True, exist_ok=True)
    with open(dst / "orders.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "pickup_x_m", "pickup_y_m", "dropoff_x_m", "dropoff_y_m",
                     "pickup_service_s", "dropoff_service_s", "placement_time", "ready_time"])
        for o in orders:
            rx, ry = restaurants[o["restaurant"]]
            w.writerow([o["order"], rx, ry, o["x"], o["y"], pickup_s, dropoff_s,
                        o.get("placement_time", ""), o.get("ready_time", "")])
    with open(dst / "couriers.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["modality", "x_m", "y_m"])
        for c in couriers:
            w.writerow(["car", c["x"], c["y"]])
    return len(orders), len(couriers)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("instance_dir", type=Path)
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args(argv)
    n_orders, n_couriers = convert(args.instance_dir, args.out_dir)
    print(f"wrote {n_orders} orders and {n_couriers} couriers to {args.out_dir}")


if __name__ == "__main__":
    main()
