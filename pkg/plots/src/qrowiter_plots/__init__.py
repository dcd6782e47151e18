from .render import CurveSpec, RenderResult, SchemaError, render

__all__ = ["CurveSpec", "RenderResult", "SchemaError", "render"]
