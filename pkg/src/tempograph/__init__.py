"""Temporal property graph path queries with a cost-based split planner."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("tempograph")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
