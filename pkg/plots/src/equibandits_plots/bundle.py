"""Readers for equibandits result bundles.

A bundle is the output directory of one CLI run: a manifest plus the mode's
tables. Everything here consumes the files only; the solver package is not
imported.
"""

from __future__ import annotations

import csv
import json
import os

SUPPORTED_SCHEMA = 1


class SchemaMismatch(ValueError):
    pass


class MissingColumns(ValueError):
    pass


class EmptyResults(ValueError):
    pass


class ResultsBundle:
    """Handle on one result directory, validated against the manifest."""

    def __init__(self, bundle_dir):
        self.dir = str(bundle_dir)
        manifest_path = os.path.join(self.dir, "manifest.json")
        if not os.path.exists(manifest_path):
            raise FileNotFoundError(f"no manifest.json in {self.dir}")
        with open(manifest_path) as handle:
            self.manifest = json.load(handle)
        version = self.manifest.get("schema_version")
        if version != SUPPORTED_SCHEMA:
            raise SchemaMismatch(
                f"bundle schema {version!r} unsupported; this reader handles {SUPPORTED_SCHEMA}"
            )

    def _read_csv(self, name, required_columns, casters):
        path = os.path.join(self.dir, name)
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise EmptyResults(f"{path} has no header") from None
            missing = [c for c in required_columns if c not in header]
            if missing:
                raise MissingColumns(f"{path} lacks columns {missing}")
            position = {c: header.index(c) for c in required_columns}
            rows = [
                {c: casters[c](row[position[c]]) for c in required_columns}
                for row in reader
            ]
        if not rows:
            raise EmptyResults(f"{path} holds no data rows")
        return rows

    def records(self):
        return self._read_csv(
            "records.csv",
            ("seed", "policy", "group", "group_size", "group_total_reward"),
            {
                "seed": int, "policy": str, "group": int,
                "group_size": int, "group_total_reward": float,
            },
        )

    def summary(self):
        path = os.path.join(self.dir, "summary.json")
        with open(path) as handle:
            payload = json.load(handle)
        if payload.get("schema_version") != SUPPORTED_SCHEMA:
            raise SchemaMismatch(f"{path} schema mismatch")
        return payload

    def pareto(self):
        return self._read_csv(
            "pareto.csv",
            ("alpha", "policy", "engagement_per_arm", "engagement_stderr",
             "clinical_per_arm", "clinical_stderr"),
            {
                "alpha": float, "policy": str,
                "engagement_per_arm": float, "engagement_stderr": float,
                "clinical_per_arm": float, "clinical_stderr": float,
            },
        )

    def capacity(self):
        return self._read_csv(
            "capacity.csv",
            ("policy", "budget", "achieved"),
            {"policy": str, "budget": int, "achieved": float},
        )

    def policy_order(self):
        return list(self.manifest.get("config", {}).get("policies", []))


def make_cli(description, render):
    """Build a --bundle/--out entry point around a render function."""
    import argparse
    import sys

    def main(argv=None) -> int:
        parser = argparse.ArgumentParser(description=description)
        parser.add_argument("--bundle", required=True, help="result bundle directory")
        parser.add_argument("--out", required=True, help="output directory for the image")
        args = parser.parse_args(argv)
        try:
            path = render(args.bundle, args.out)
        except (OSError, ValueError) as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
        print(path)
        return 0

    return main
