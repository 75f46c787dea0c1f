"""Run manifests: the fully resolved configuration plus input digests,
written next to every report so a run can be reproduced bit-for-bit on
the same machine.
"""

from __future__ import annotations

import hashlib
import json
import os

TOOL_VERSION = "0.1.0"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(command: str, options: dict, input_paths: list) -> dict:
    return {
        "tool_version": TOOL_VERSION,
        "command": command,
        "options": options,
        "input_digests": {os.fspath(p): file_digest(p)
                          for p in input_paths if p and os.path.exists(p)},
    }


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)
