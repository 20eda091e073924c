"""Run manifests: reproducibility sidecars written next to every output."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

__version__ = "0.1.0"

__all__ = ["OutputRecord", "RunManifest", "file_digest", "write_manifest", "verify_manifest"]


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class OutputRecord:
    path: str
    sha256: str
    size: int


@dataclass
class RunManifest:
    """Everything needed to reproduce and post-hoc verify one invocation."""

    tool: str
    version: str
    created_utc: str
    command: list[str]
    seed: int | None
    scenario_path: str | None
    scenario_sha256: str | None
    config_digest: str | None
    outputs: list[OutputRecord] = field(default_factory=list)

    @classmethod
    def create(
        cls,
        command: list[str],
        seed: int | None,
        scenario_path: str | Path | None,
        config_digest: str | None,
        output_paths: list[Path],
        base_dir: Path,
    ) -> "RunManifest":
        records = [
            OutputRecord(
                path=str(path.relative_to(base_dir)),
                sha256=file_digest(path),
                size=path.stat().st_size,
            )
            for path in output_paths
        ]
        return cls(
            tool="vapornoise",
            version=__version__,
            created_utc=datetime.now(timezone.utc).isoformat(),
            command=list(command),
            seed=seed,
            scenario_path=str(scenario_path) if scenario_path is not None else None,
            scenario_sha256=(
                file_digest(scenario_path) if scenario_path is not None else None
            ),
            config_digest=config_digest,
            outputs=records,
        )

    def write(self, path: str | Path) -> None:
        payload = asdict(self)
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def verify_manifest(manifest_path: str | Path) -> list[str]:
    """Re-hash every output listed in a manifest; returns mismatch messages."""
    manifest_path = Path(manifest_path)
    data = json.loads(manifest_path.read_text(encoding="utf-8"))
    problems: list[str] = []
    base = manifest_path.parent
    for record in data.get("outputs", []):
        target = base / record["path"]
        if not target.exists():
            problems.append(f"missing output {record['path']}")
            continue
        actual = file_digest(target)
        if actual != record["sha256"]:
            problems.append(
                f"digest mismatch for {record['path']}: "
                f"expected {record['sha256']}, got {actual}"
            )
    return problems
