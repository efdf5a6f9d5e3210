"""Gradient fixtures live in the package so ``diffpol verify`` runs the same checks."""
from diffpol.cli.verify import denoiser_gradcheck, layer_gradcheck

__all__ = ["denoiser_gradcheck", "layer_gradcheck"]
