"""
difflab - laboratório de aproximações por difusão
"""

__version__ = "0.1.0"
