"""Seven-DOF lower-limb exoskeleton dynamics with dual-rate model-reference
computed-torque control."""

__version__ = "0.1.0"
