"""Shape and impedance recovery for 2D dissipative penetrable obstacles."""

__version__ = "0.1.0"
