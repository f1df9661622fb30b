"""Reproducibility manifests for CLI outputs.

Every file-producing command writes a ``<out>.manifest.json`` sidecar
recording the command, its full config snapshot, input paths, tool
version, seed (always present, even for commands that ignore it), a
timestamp, and the hash of each output.  Output files themselves stay
timestamp-free so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

from qudparse import __version__


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path_for(out_path: "str | Path") -> Path:
    return Path(str(out_path) + ".manifest.json")


def write_manifest(
    command: str,
    config: Mapping,
    inputs: Iterable["str | Path"],
    outputs: Iterable["str | Path"],
    seed: int,
) -> "Path | None":
    """Write the sidecar next to the first output; returns its path."""
    outputs = [Path(p) for p in outputs]
    if not outputs:
        return None
    manifest = {
        "command": command,
        "config": dict(config),
        "inputs": [str(p) for p in inputs],
        "tool_version": __version__,
        "seed": seed,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "outputs": [{"path": str(p), "sha256": _sha256(p)} for p in outputs],
    }
    target = manifest_path_for(outputs[0])
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                      encoding="utf-8")
    return target
