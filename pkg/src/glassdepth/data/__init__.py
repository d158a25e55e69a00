"""Dataset formats, mesh rendering, annotation and synthetic scene generation."""
