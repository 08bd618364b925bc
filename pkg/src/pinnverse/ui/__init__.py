"""Rich tables for fit reports and sweep summaries."""
