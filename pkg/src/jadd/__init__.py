"""Joint angle-delay-Doppler channel prediction for FDD massive MIMO."""

from .sysconfig import ConfigError, OffRegionError, SystemConfig

__version__ = "0.1.0"

__all__ = ["ConfigError", "OffRegionError", "SystemConfig", "__version__"]
