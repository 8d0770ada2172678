"""Run manifests: content hashes tying every emitted number to its inputs."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def config_hash(config_dict: dict) -> str:
    return sha256_text(json.dumps(config_dict, sort_keys=True, default=str))


class RunManifest:
    """Collects inputs/outputs while a command runs, then writes manifest.json."""

    def __init__(self, command: str, config_dict: dict, seeds=()):
        self.payload = {
            "command": command,
            "config": config_dict,
            "config_sha256": config_hash(config_dict),
            "seeds": list(seeds),
            "inputs": {},
            "outputs": {},
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "finished_at": None,
        }

    def add_input(self, path: str | Path) -> None:
        p = Path(path)
        self.payload["inputs"][str(p)] = sha256_file(p)

    def add_output(self, path: str | Path) -> None:
        p = Path(path)
        self.payload["outputs"][str(p)] = sha256_file(p)

    def note(self, key: str, value) -> None:
        self.payload[key] = value

    def write(self, path: str | Path) -> Path:
        self.payload["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(self.payload, indent=2, sort_keys=True, default=str) + "\n")
        return p


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
