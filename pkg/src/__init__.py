"""
Near-Equality Mass Laboratory - Main Package
"""
__version__ = "1.0.0"
__author__ = "Near-Equality Mass Laboratory Team"
__description__ = "Numerical ADM mass, conformal flattening and mass-flow experiments for harmonically flat ends"
