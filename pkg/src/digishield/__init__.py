"""Audio-visual deepfake detection with two-stream encoders and cross-modal attention."""

__version__ = "0.1.0"
