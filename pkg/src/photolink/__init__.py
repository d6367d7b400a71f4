"""photolink: registration engine and annotation service for dated photographs."""

__version__ = "0.1.0"
