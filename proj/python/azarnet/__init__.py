"""Python bindings for the AzarNet C++ core."""

from ._core import (
    CLASS_NAMES,
    CLIP_SAMPLES,
    SAMPLE_RATE,
    AzarnetError,
    Model,
    class_report,
    f1_score,
    generate_dataset,
    gradcheck,
    load_wav,
    preprocess,
    spectrogram,
    stft_magnitude,
    synth_clip,
    train,
    write_wav,
)

__all__ = [
    "CLASS_NAMES",
    "CLIP_SAMPLES",
    "SAMPLE_RATE",
    "AzarnetError",
    "Model",
    "class_report",
    "f1_score",
    "generate_dataset",
    "gradcheck",
    "load_wav",
    "preprocess",
    "spectrogram",
    "stft_magnitude",
    "synth_clip",
    "train",
    "write_wav",
]
