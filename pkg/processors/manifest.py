# processors/manifest.py
from __future__ import annotations

import hashlib
import json
import platform
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Union

from errors import IoFailure

MANIFEST_NAME = "manifest.json"
TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "plotly", "streamlit", "tabulate")


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def package_versions(names: Iterable[str] = TRACKED_PACKAGES) -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in names:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def manifest_text(
    command: list[str],
    instance_name: str,
    instance_sha256: str,
    options: Mapping[str, Any],
    seed: Optional[int],
    artifacts: Mapping[str, Union[str, Path]],
    created: Optional[datetime] = None,
) -> str:
    """
    Sorted JSON with the timestamp alone on the last member line, so two runs
    differ in that one line only.
    """
    body = {
        "command": list(command),
        "instance": {"name": instance_name, "sha256": instance_sha256},
        "options": dict(options),
        "seed": seed,
        "versions": package_versions(),
        "artifacts": {label: sha256_file(p) for label, p in sorted(artifacts.items())},
    }
    lines = json.dumps(body, indent=2, sort_keys=True, default=str).splitlines()
    stamp = (created or datetime.now(timezone.utc)).isoformat(timespec="seconds")
    lines[-2] += ","
    lines.insert(-1, f'  "timestamp": "{stamp}"')
    return "\n".join(lines) + "\n"


def write_manifest(out_dir: Union[str, Path], **fields: Any) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(manifest_text(**fields), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(path), exc.strerror or str(exc)) from exc
    return path


__all__ = ["MANIFEST_NAME", "sha256_text", "sha256_file", "package_versions", "manifest_text", "write_manifest"]
