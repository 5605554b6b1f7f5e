"""
cdlgen

Generate, validate, simulate and evaluate CDL building-control blocks with an
LLM-in-the-loop pipeline grounded on an explicit library index.
"""

from pathlib import Path

__version__ = "0.1.0"

DATA_DIR = Path(__file__).parent / "data"
