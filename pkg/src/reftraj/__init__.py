"""Reinforcement learning of arm reaching motions guided by sampling-based reference paths."""

from importlib.resources import files

__version__ = "0.1.0"


def data_path(*parts: str):
    """Path to a bundled world or task file, e.g. ``data_path("tasks", "toy-1.json")``."""
    return files(__name__).joinpath("data", *parts)
