"""Reproducible run manifests.

A manifest pins everything that determines a run's outputs (subcommand
parameters, grid, budgets, seed); its content hash is embedded in every
result file.  Worker count and output directory are recorded for the run
log but excluded from the hash, since results are invariant to both.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    params: dict
    seed: int
    workers: int = 1
    out_dir: Optional[str] = None

    def semantic_dict(self) -> dict:
        return {"subcommand": self.subcommand, "params": self.params, "seed": self.seed}

    def content_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def save(self, path: str) -> None:
        doc = dict(self.semantic_dict(), workers=self.workers, hash=self.content_hash())
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")


def load_manifest(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
