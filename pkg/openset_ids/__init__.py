# Package initialization file for openset_ids
__version__ = "0.1.0"
