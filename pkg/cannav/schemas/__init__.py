# Pydantic models for configuration, metrics and artifacts
