#!/usr/bin/env python3
"""Write the self-contained offline dataset (images, manifest, scripted
backend) used by the tests and the offline ablation demo."""

from __future__ import annotations

import argparse
from pathlib import Path

from schemaground.toydata import make_toy_dataset


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out", type=Path, default=Path("toy-dataset"), help="output directory"
    )
    args = parser.parse_args()
    dataset = make_toy_dataset(args.out)
    print(f"manifest:       {dataset.manifest_path}")
    print(f"backend config: {dataset.backend_config_path}")
    print(f"fixtures:       {dataset.fixture_path}")
    print(f"images:         {len(dataset.image_paths)} under {args.out / 'images'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
