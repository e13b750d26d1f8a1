"""Transformer fine-tuning harness for offer-pair classification exports."""

__version__ = "0.1.0"
