"""Signal Temporal Logic mission planning for quad-rotor fleets

.. moduleauthor:: CryptoRalph

"""
from loguru import logger

__version__ = "0.1.0"

logger.disable("stlfleet")
