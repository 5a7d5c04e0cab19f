"""Run manifests: enough metadata beside every output set to reproduce it.

A manifest records the command, master seed, replication count, the paths
and content digests of every input (digested before the run starts), the
tool version and the produced output names.  Manifests carry no
timestamps, so identical runs produce identical manifests.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__

MANIFEST_NAME = "manifest.json"


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(
    command: str,
    inputs: dict[str, str | Path],
    params: dict,
    outputs: list[str],
    master_seed: int | None = None,
    replications: int | None = None,
) -> dict:
    if replications is not None and replications < 1:
        raise ValueError("replication count must be >= 1")
    return {
        "tool": "buslinesim",
        "version": __version__,
        "command": command,
        "master_seed": master_seed,
        "replications": replications,
        "inputs": {
            name: {"path": str(path), "sha256": file_digest(path)}
            for name, path in sorted(inputs.items())
        },
        "params": params,
        "outputs": sorted(outputs),
    }


def write_manifest(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
