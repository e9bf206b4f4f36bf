"""SQLite-backed cache of eikonal distance grids."""

from __future__ import annotations

import logging
import sqlite3
import struct
import threading
from pathlib import Path

import numpy as np

from warpbench.models import MeshSpec

logger = logging.getLogger(__name__)

DEFAULT_DB_PATH = Path.home() / ".warpbench" / "fields.db"

# magic, rows, cols, profile fingerprint
_HEADER = struct.Struct("<8sQQ16s")
_MAGIC = b"WBFIELD1"


def encode_grid(d: np.ndarray, fingerprint: str) -> bytes:
    """Header followed by the row-major little-endian float64 grid."""
    rows, cols = d.shape
    head = _HEADER.pack(_MAGIC, rows, cols, fingerprint.encode("ascii")[:16].ljust(16, b"\0"))
    return head + np.ascontiguousarray(d, dtype="<f8").tobytes()


def decode_grid(blob: bytes) -> tuple[np.ndarray, str]:
    if len(blob) < _HEADER.size:
        raise ValueError("blob shorter than header")
    magic, rows, cols, fp = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    body = blob[_HEADER.size :]
    if len(body) != rows * cols * 8:
        raise ValueError(f"expected {rows}x{cols} grid, got {len(body)} bytes")
    d = np.frombuffer(body, dtype="<f8").reshape(rows, cols).copy()
    return d, fp.rstrip(b"\0").decode("ascii")


class FieldCache:
    """Thread-safe store of distance grids keyed by (profile fingerprint, source radius, mesh)."""

    def __init__(self, db_path: str | Path | None = None):
        self.db_path = Path(db_path) if db_path else DEFAULT_DB_PATH
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._local = threading.local()
        self._init_db()

    @property
    def _conn(self) -> sqlite3.Connection:
        if not hasattr(self._local, "conn") or self._local.conn is None:
            self._local.conn = sqlite3.connect(str(self.db_path))
            self._local.conn.row_factory = sqlite3.Row
            self._local.conn.execute("PRAGMA journal_mode=WAL")
            self._local.conn.execute("PRAGMA synchronous=NORMAL")
        return self._local.conn

    def _init_db(self) -> None:
        conn = self._conn
        conn.executescript("""
            CREATE TABLE IF NOT EXISTS distance_fields (
                fingerprint TEXT NOT NULL,
                source TEXT NOT NULL,
                mesh TEXT NOT NULL,
                grid BLOB NOT NULL,
                PRIMARY KEY (fingerprint, source, mesh)
            );
        """)
        conn.commit()

    # ── Distance grids ────────────────────────────────────────────

    def get(self, fingerprint: str, source: float, mesh: MeshSpec) -> np.ndarray | None:
        row = self._conn.execute(
            "SELECT grid FROM distance_fields WHERE fingerprint = ? AND source = ? AND mesh = ?",
            (fingerprint, repr(float(source)), mesh.key()),
        ).fetchone()
        if row is None:
            return None
        try:
            d, fp = decode_grid(row["grid"])
        except ValueError as e:
            logger.warning(f"Discarding corrupt cached field for r0={source:g}: {e}")
            self.delete(fingerprint, source, mesh)
            return None
        if fp != fingerprint[:16] or d.shape != (mesh.n_r, mesh.n_psi):
            logger.warning(f"Cached field for r0={source:g} does not match its key; discarding")
            self.delete(fingerprint, source, mesh)
            return None
        logger.info(f"Distance field cache hit: r0={source:g}, mesh {mesh.n_r}x{mesh.n_psi}")
        return d

    def put(self, fingerprint: str, source: float, mesh: MeshSpec, d: np.ndarray) -> None:
        self._conn.execute(
            "INSERT OR REPLACE INTO distance_fields (fingerprint, source, mesh, grid) VALUES (?, ?, ?, ?)",
            (fingerprint, repr(float(source)), mesh.key(), encode_grid(d, fingerprint)),
        )
        self._conn.commit()

    def delete(self, fingerprint: str, source: float, mesh: MeshSpec) -> None:
        self._conn.execute(
            "DELETE FROM distance_fields WHERE fingerprint = ? AND source = ? AND mesh = ?",
            (fingerprint, repr(float(source)), mesh.key()),
        )
        self._conn.commit()

    def count(self) -> int:
        return self._conn.execute("SELECT COUNT(*) FROM distance_fields").fetchone()[0]

    def close(self) -> None:
        if hasattr(self._local, "conn") and self._local.conn:
            self._local.conn.close()
            self._local.conn = None
