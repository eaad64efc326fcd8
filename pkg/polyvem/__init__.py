"""
polyvem — віртуальні елементи найнижчого порядку для тривимірної магнітостатики на багатогранних сітках
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
