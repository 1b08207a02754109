"""Numerics for fractal Lavrentiev-gap constructions."""
