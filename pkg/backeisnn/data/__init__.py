"""Dataset loaders and input encodings."""
