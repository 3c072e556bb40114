"""
Capture analysis for stable periodic orbits of unimodal maps
Main package initialization
"""

__version__ = "0.1.0"
__author__ = "Capture Analysis Team"
