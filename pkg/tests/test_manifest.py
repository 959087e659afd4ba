from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone

from processors.manifest import (
    MANIFEST_NAME,
    manifest_text,
    package_versions,
    sha256_file,
    sha256_text,
    write_manifest,
)


def test_hashes_agree(tmp_path) -> None:
    path = tmp_path / "a.txt"
    path.write_bytes(b"status=optimal\n")
    assert sha256_text("status=optimal\n") == sha256_file(path)
    assert sha256_text("") == hashlib.sha256(b"").hexdigest()


def test_versions_cover_python() -> None:
    versions = package_versions(["surely-not-a-real-package"])
    assert "python" in versions
    assert versions["surely-not-a-real-package"] == "not installed"


def _fields(tmp_path) -> dict:
    artifact = tmp_path / "solution.txt"
    artifact.write_text("# status=optimal\n", encoding="utf-8")
    return {
        "command": ["solve", "tiny8"],
        "instance_name": "tiny8",
        "instance_sha256": "ab" * 32,
        "options": {"engine": "highs", "time_limit": 60.0},
        "seed": 2023,
        "artifacts": {"solution": artifact},
    }


def test_timestamp_is_the_only_difference(tmp_path) -> None:
    fields = _fields(tmp_path)
    first = manifest_text(**fields, created=datetime(2024, 1, 1, tzinfo=timezone.utc))
    second = manifest_text(**fields, created=datetime(2024, 6, 1, 12, 30, tzinfo=timezone.utc))
    a, b = first.splitlines(), second.splitlines()
    assert len(a) == len(b)
    differing = [i for i, (x, y) in enumerate(zip(a, b)) if x != y]
    assert differing == [len(a) - 2]
    assert a[-2].strip().startswith('"timestamp"')

    body = json.loads(first)
    assert body["timestamp"] == "2024-01-01T00:00:00+00:00"
    assert body["instance"] == {"name": "tiny8", "sha256": "ab" * 32}
    assert body["artifacts"]["solution"] == sha256_text("# status=optimal\n")


def test_write_manifest(tmp_path) -> None:
    path = write_manifest(tmp_path / "run", **_fields(tmp_path))
    assert path.name == MANIFEST_NAME
    assert json.loads(path.read_text(encoding="utf-8"))["seed"] == 2023
