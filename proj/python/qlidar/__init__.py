"""Quantum-illumination lidar simulator."""

from ._qlidar import *  # noqa: F401,F403
from ._qlidar import __version__, Error  # noqa: F401
