"""Baseband modems and a quasi-real-time pipeline scheduler for desk-scale SDR work."""

from usdr.iq import BitBuffer, IqFrame

__version__ = "0.1.0"

__all__ = ["BitBuffer", "IqFrame", "__version__"]
