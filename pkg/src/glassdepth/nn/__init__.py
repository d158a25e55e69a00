"""Network building blocks, the two networks, their optimizer and training loops."""
