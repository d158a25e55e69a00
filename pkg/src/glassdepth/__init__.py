"""Depth completion for transparent objects from joint point-cloud and depth completion."""
