#!/usr/bin/env python3
"""Convert ImageAI/YOLO-style detector output to the detection interchange schema.

The upstream tool (ImageAI's detectObjectsFromImage with a YOLOv3 model)
emits a JSON array like:

    [
      {"name": "person", "percentage_probability": 99.68,
       "box_points": [744, 231, 817, 439]},
      ...
    ]

This adapter rewrites it as a schema_version-1 detection file for one
image id. Identities are not invented: pass --identity NAME:INDEX pairs
to label specific records (e.g. --identity person-a:0).

Usage:
    python tools/yolo_adapter.py raw.json --image-id street_cam_01 \
        -o detections.json [--identity person-a:0 --identity person-a:2]
"""

import argparse
import json
import sys


def convert(raw: list, image_id: str, identities: dict[int, str]) -> dict:
    detections = []
    for i, rec in enumerate(raw):
        x1, y1, x2, y2 = rec["box_points"]
        detections.append(
            {
                "image_id": image_id,
                "class_label": rec["name"],
                "confidence": round(rec["percentage_probability"] / 100.0, 6),
                "bbox": [x1, y1, x2 - x1, y2 - y1],
                **({"identity": identities[i]} if i in identities else {}),
            }
        )
    return {"schema_version": 1, "detections": detections}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("raw", help="detector output JSON (array of box records)")
    parser.add_argument("--image-id", required=True)
    parser.add_argument("-o", "--output", default="-")
    parser.add_argument(
        "--identity",
        action="append",
        default=[],
        metavar="NAME:INDEX",
        help="assign identity NAME to the record at INDEX (repeatable)",
    )
    args = parser.parse_args(argv)

    with open(args.raw) as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        print("error: expected a JSON array of detector records", file=sys.stderr)
        return 2

    identities = {}
    for spec in args.identity:
        name, _, index = spec.rpartition(":")
        identities[int(index)] = name

    doc = convert(raw, args.image_id, identities)
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
