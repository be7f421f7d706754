"""RF dosimetry: learned tissue properties, FDTD dipole exposure and 10-g SAR."""

__version__ = "0.1.0"
