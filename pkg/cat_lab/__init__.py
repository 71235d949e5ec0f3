"""
cat-lab - Laboratorio di disegno sequenziale per il testing adattivo (CAT)
"""

__version__ = "0.1.0"
