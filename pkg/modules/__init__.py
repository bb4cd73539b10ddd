"""
spconv Modules Package
Spectral analysis, clipping and TT compression of periodic convolutional layers
"""

__version__ = "1.0.0"
