# Cylinder DCAA link-level simulator

__version__ = "1.0.0"
