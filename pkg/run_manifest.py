"""
fedregret - Run Manifest
Records what a CLI run was asked to do and what it wrote, as manifest.json in
the output directory. No timestamps are stored, so identical runs produce
identical manifests.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from config import RunConfig
from logging_config import get_logger

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.json"


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _canonical(payload: Any) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str).encode("utf-8")


class RunManifest:
    """
    Provenance of one run: the resolved config with every default filled in,
    content hashes of the config file and of the resolved config, and the
    emitted files with their hashes.
    """

    def __init__(self, run_config: RunConfig) -> None:
        self.run_config = run_config
        self.output_dir = Path(run_config.output_dir)
        self.outputs: dict[str, str] = {}
        self.extra: dict[str, Any] = {}

    @property
    def resolved(self) -> dict[str, Any]:
        return self.run_config.to_dict()

    @property
    def config_sha256(self) -> str | None:
        path = self.run_config.config_path
        if path is None or not Path(path).is_file():
            return None
        return _sha256_bytes(Path(path).read_bytes())

    @property
    def resolved_sha256(self) -> str:
        return _sha256_bytes(_canonical(self.resolved))

    def record_output(self, path: Path | str) -> None:
        """Register an emitted file by its path relative to the output directory."""
        target = Path(path)
        try:
            name = str(target.relative_to(self.output_dir))
        except ValueError:
            name = str(target)
        self.outputs[name] = _sha256_bytes(target.read_bytes())

    def note(self, key: str, value: Any) -> None:
        """Attach a run summary value (e.g. a robustness ratio)."""
        self.extra[key] = value

    def to_dict(self) -> dict[str, Any]:
        return {
            "subcommand": self.run_config.subcommand,
            "seeds": list(self.run_config.seeds),
            "config": self.resolved,
            "config_file_sha256": self.config_sha256,
            "resolved_config_sha256": self.resolved_sha256,
            "outputs": dict(sorted(self.outputs.items())),
            "summary": self.extra,
        }

    def write(self) -> Path:
        """Write manifest.json; the manifest does not list itself."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        target = self.output_dir / MANIFEST_NAME
        with open(target, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, default=str)
            f.write("\n")
        logger.debug(f"Wrote run manifest to {target}")
        return target


def load_manifest(output_dir: Path | str) -> dict[str, Any]:
    with open(Path(output_dir) / MANIFEST_NAME, encoding="utf-8") as f:
        return json.load(f)


__all__ = ["RunManifest", "load_manifest", "MANIFEST_NAME"]
