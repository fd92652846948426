"""AMLI preconditioners for isogeometric B-spline/NURBS discretizations."""

__version__ = "0.1.0"
