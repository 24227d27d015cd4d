"""Package exception types."""


class ConfigError(ValueError):
    """Invalid or unreadable scenario configuration."""


class ConvergenceError(RuntimeError):
    """A numerical procedure failed its stated convergence check."""
