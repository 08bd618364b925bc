"""CSV and JSON ingestion and export."""
