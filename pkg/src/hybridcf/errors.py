class HybridCFError(Exception):
    """Base class for every error raised by the package."""


class IngestError(HybridCFError, ValueError):
    """Malformed ratings/catalog/profile input."""


class EmptyResultError(HybridCFError, ValueError):
    """An operation would produce nothing usable (no items, no pairs, no neighbors)."""


class ConfigError(HybridCFError, ValueError):
    pass
