"""Vision toolkit for cleanliness monitoring in public spaces."""

__version__ = "0.1.0"
FORMAT_VERSION = 1
