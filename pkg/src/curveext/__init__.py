"""curveext: numerical laboratory for extension estimates along space curves."""

__version__ = "0.1.0"
