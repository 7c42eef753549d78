"""Plan UAV-style nadir image missions and build datasets from static map imagery."""

__version__ = "0.1.0"
