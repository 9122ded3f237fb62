"""Run output directory with an fsynced verdict journal and snapshot."""

import json
import logging
import os
import threading
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .errors import OwnershipError
from .protocol import encode_document, encode_row

logger = logging.getLogger(__name__)


class RunStore:
    """Output files of one run.

    JSON documents are replaced atomically; CSV tables are appended and
    fsynced. Hypothesis verdicts go to a journal (verdicts.jsonl) plus a
    snapshot (verdicts.json) and are replayed on open, so later scenarios in
    the same directory can reuse them. Each path has a single writer.
    """

    def __init__(
        self,
        out_dir: str = "out",
        journal_filename: str = "verdicts.jsonl",
        snapshot_filename: str = "verdicts.json",
    ):
        self._dir = Path(out_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._journal_path = self._dir / journal_filename
        self._snapshot_path = self._dir / snapshot_filename
        self._verdicts: dict[str, Any] = {}
        self._owners: dict[Path, str] = {}
        self._lock = threading.RLock()
        self._recover()

    def _recover(self) -> None:
        """Load the verdict snapshot, then replay the journal."""
        self._verdicts = {}
        if self._snapshot_path.exists():
            try:
                with open(self._snapshot_path, "r") as f:
                    self._verdicts = json.load(f)
            except (json.JSONDecodeError, OSError):
                logger.warning("unreadable verdict snapshot %s ignored", self._snapshot_path)
                self._verdicts = {}
        if self._journal_path.exists():
            with open(self._journal_path, "r") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        entry = json.loads(line)
                    except json.JSONDecodeError:
                        # torn final line
                        break
                    if entry.get("op") == "set":
                        self._verdicts[entry["key"]] = entry.get("value")
                    elif entry.get("op") == "delete":
                        self._verdicts.pop(entry.get("key"), None)

    @property
    def root(self) -> Path:
        return self._dir

    def path(self, name: str) -> Path:
        return self._dir / name

    def claim(self, name: str, owner: str) -> Path:
        """Register owner as the only writer of name."""
        path = self.path(name)
        with self._lock:
            current = self._owners.get(path)
            if current is not None and current != owner:
                raise OwnershipError(f"{path} is owned by {current!r}, not {owner!r}")
            self._owners[path] = owner
        return path

    def write_json(self, name: str, doc: dict, owner: str = "run") -> Path:
        """Write a JSON document via temp file, fsync and rename."""
        path = self.claim(name, owner)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with self._lock:
            with open(tmp, "wb") as f:
                f.write(encode_document(doc))
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, path)
        logger.debug("wrote %s", path)
        return path

    def start_table(self, name: str, header: Sequence[str], owner: str = "run") -> Path:
        """Create (or truncate) a CSV table with its header row."""
        path = self.claim(name, owner)
        with self._lock:
            with open(path, "w", newline="") as f:
                f.write(encode_row(header))
                f.flush()
                os.fsync(f.fileno())
        return path

    def append_rows(self, name: str, rows: Iterable[Sequence[Any]], owner: str = "run") -> None:
        """Append rows to a started table and fsync."""
        path = self.claim(name, owner)
        with self._lock:
            with open(path, "a", newline="") as f:
                for row in rows:
                    f.write(encode_row(row))
                f.flush()
                os.fsync(f.fileno())

    def _append_journal(self, entry: dict) -> None:
        with open(self._journal_path, "a") as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
            f.flush()
            os.fsync(f.fileno())

    def _save_snapshot(self) -> None:
        tmp = self._snapshot_path.with_suffix(".json.tmp")
        with open(tmp, "w") as f:
            json.dump(self._verdicts, f, sort_keys=True, indent=2)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, self._snapshot_path)

    def record_verdict(self, check: str, value: dict) -> None:
        """Persist a verdict under its check name."""
        with self._lock:
            self._verdicts[check] = value
            self._append_journal({"op": "set", "key": check, "value": value})
            self._save_snapshot()

    def forget_verdict(self, check: str) -> None:
        with self._lock:
            self._verdicts.pop(check, None)
            self._append_journal({"op": "delete", "key": check})
            self._save_snapshot()

    def verdict(self, check: str) -> Optional[dict]:
        """Cached verdict for a check, or None."""
        with self._lock:
            return self._verdicts.get(check)

    def verdicts(self) -> dict[str, Any]:
        with self._lock:
            return dict(self._verdicts)

    def journal_path(self) -> Path:
        return self._journal_path

    def snapshot_path(self) -> Path:
        return self._snapshot_path
