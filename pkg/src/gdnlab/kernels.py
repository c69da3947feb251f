"""Backend selection for the isomorphism-search kernel.

The compiled extension is used when it imports; otherwise (or when
``GDNLAB_PURE_PYTHON=1``) the pure-Python twin is used. Both are importable
directly for cross-checking and benchmarking.
"""

import os

from . import _search_py

python_search = _search_py.search

try:
    if os.environ.get("GDNLAB_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend forced")
    from ._search import search as compiled_search
except ImportError:
    compiled_search = None

if compiled_search is not None:
    search = compiled_search
    BACKEND = "cython"
else:
    search = python_search
    BACKEND = "python"

__all__ = ["search", "python_search", "compiled_search", "BACKEND"]
