"""Arbitrary-scale super-resolution with a meta-learned upscaler trained adversarially."""

__version__ = "0.1.0"
