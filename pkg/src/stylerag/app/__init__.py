"""Command line, on-disk database and HTTP service."""
