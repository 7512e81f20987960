"""Resonance fluorescence of a two-level atom strongly coupled to a driven cavity."""
