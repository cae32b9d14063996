"""Interest-aware adaptive bitrate streaming: simulator, policies, evaluation."""

__version__ = "0.1.0"
