"""Command-line driver, file output and study harnesses."""
