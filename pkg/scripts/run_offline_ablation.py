#!/usr/bin/env python3
"""Run the full five-mode ablation offline: build the toy dataset, invoke the
`ablate` subcommand against its scripted backend, and leave all artifacts
(predictions, per-mode reports, summary) in the work directory."""

from __future__ import annotations

import argparse
from pathlib import Path

from schemaground.cli import main as cli_main
from schemaground.toydata import make_toy_dataset


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--workdir", type=Path, default=Path("ablation"), help="where to put everything"
    )
    parser.add_argument("--runs", type=int, default=1)
    parser.add_argument("--metric", choices=["exact", "graded"], default="exact")
    args = parser.parse_args()

    dataset = make_toy_dataset(args.workdir / "dataset")
    return cli_main(
        [
            "ablate",
            "--manifest", str(dataset.manifest_path),
            "--backend-config", str(dataset.backend_config_path),
            "--cache-dir", str(args.workdir / "cache"),
            "--runs", str(args.runs),
            "--metric", args.metric,
            "--out", str(args.workdir / "out"),
        ]
    )


if __name__ == "__main__":
    raise SystemExit(main())
