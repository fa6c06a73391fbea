"""Desk-scale simulation and analysis toolkit for a multimodal robotic fingertip.

Submodules:

- ``collision``: two-mass collision model and the collision impulse ratio
- ``kinematics``: spherical contact parameterization and contact frame
- ``sensor``: synthetic barometer array and bowl data-collection protocol
- ``estimator``: numpy MLP contact estimator trained with Adam
- ``latency``: cross-correlation latency, zero-phase smoothing, transitions
- ``mapping``: coarse maps from proximity rays and contacts
- ``reactive``: point-mass simulation of contact following and potential fields
"""

__version__ = "0.1.0"
