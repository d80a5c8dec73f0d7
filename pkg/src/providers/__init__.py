from .local import SafetensorsFileSource, SyntheticSpecSource, open_source

__all__ = ["SafetensorsFileSource", "SyntheticSpecSource", "open_source"]
