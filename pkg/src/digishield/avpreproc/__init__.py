from .audio import AudioWave, MfccConfig, MfccImage, mfcc, mfcc_image, resample_audio
from .frames import (
    AugmentParams,
    FaceBox,
    FaceDetector,
    FrameStack,
    FullFrameDetector,
    PreprocessError,
    augment,
    color_jitter,
    crop_face,
    crop_window,
    sample_frames,
    segment_boundaries,
)
from .pipeline import PreprocessConfig, preprocess_clip, preprocess_manifest

__all__ = [
    "AudioWave",
    "AugmentParams",
    "FaceBox",
    "FaceDetector",
    "FrameStack",
    "FullFrameDetector",
    "MfccConfig",
    "MfccImage",
    "PreprocessConfig",
    "PreprocessError",
    "augment",
    "color_jitter",
    "crop_face",
    "crop_window",
    "mfcc",
    "mfcc_image",
    "preprocess_clip",
    "preprocess_manifest",
    "resample_audio",
    "sample_frames",
    "segment_boundaries",
]
