"""Planar polyconvex elasticity with a log barrier on the Jacobian, plus
numerical probes of twist positivity and interior regularity."""

__version__ = "0.1.0"
