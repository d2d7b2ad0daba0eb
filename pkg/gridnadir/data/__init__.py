"""Bundled desk-scale data."""

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent
SYSTEM_DIR = DATA_DIR / "system"
AREAS_DIR = DATA_DIR / "areas"
SNAPSHOTS_DIR = DATA_DIR / "snapshots"
