"""ncc: entropy coding, latent-variable coding, rate-distortion and quantization toolkit."""

__version__ = "0.1.0"
