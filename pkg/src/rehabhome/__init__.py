"""Desk-scale smart-home rehabilitation platform.

Synthetic wearable/ambient sensor streams feed a synchronizing gateway that
performs gait analysis and impairment classification, drives virtual home
appliances over an encrypted UDP control protocol, and runs a safety-guarded
autonomous assistance agent.
"""

__version__ = "0.1.0"
