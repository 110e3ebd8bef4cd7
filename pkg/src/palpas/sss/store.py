"""Append-only JSON-lines persistence for the sync service.

Every mutation is one JSON object per line; service state is rebuilt by
replaying the log. Binary values travel as lowercase hex, so a raw dump of
the file contains salts, identifiers, and username ciphertexts in encoded
form only, and no password-, seed-, or URL-derived bytes at all.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterator


class AppendLog:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True, separators=(",", ":"))
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def replay(self) -> Iterator[dict]:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)
