"""Environments the loop can drive: compiler pragmas, MLP training, and a synthetic hidden-cause system."""
