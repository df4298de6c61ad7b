"""Restoration scheduling with separable mobile energy storage, mobile generators and fuel tankers."""

__version__ = "0.1.0"
