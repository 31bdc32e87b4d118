"""
tsirelson-norms - norms, norming functionals and averages in mixed Tsirelson spaces.
"""

__version__ = "0.1.0"
