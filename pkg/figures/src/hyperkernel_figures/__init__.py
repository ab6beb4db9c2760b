"""Batch figure rendering for hyperkernel experiment tables."""

from .figures import (SCHEMAS, FigureSpec, RenderResult, SchemaError,
                      read_table, render)

__all__ = ["SCHEMAS", "FigureSpec", "RenderResult", "SchemaError",
           "read_table", "render"]
