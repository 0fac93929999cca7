"""Ingest gateway: FastAPI app and the append-only store behind it."""
from rainflag.service.app import create_app
from rainflag.service.store import ReadingStore, StoredReading, export_records

__all__ = ["create_app", "ReadingStore", "StoredReading", "export_records"]
