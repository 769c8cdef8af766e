"""
tmdid: adaptive UKF identification of shear frames with tuned mass dampers.

Joint state and stiffness estimation, detection and localization of
abrupt stiffness loss, and the tooling to study the filter setup.
"""

__version__ = "0.1.0"
