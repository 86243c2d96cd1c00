# CLI command groups
