"""HTTP service wrapping the retrieval pipeline."""
