"""Feature-level voice sanitization toolkit.

Vocoder analysis/synthesis, mel-cepstral coding, style-conversion training
and inference, and the WER/EER evaluation metrics, backed by the C++ core.
"""

from sanitone._sanitone import (  # noqa: F401
    AnalysisResult,
    ArchDescriptor,
    F0Stats,
    FeatureConfig,
    FrozenFilter,
    SanitoneError,
    TrainConfig,
    VocoderConfig,
    Waveform,
    analyze,
    compute_f0_stats,
    convert_log_f0,
    equal_error_rate,
    load_filter,
    mcep_to_sp,
    read_wav,
    replace_analysis,
    resample,
    sanitize,
    save_filter,
    sp_to_mcep,
    speaker_embedding,
    speaker_score,
    spectrogram_stats,
    synthesize,
    to_single_precision,
    train_filter,
    word_error_rate,
    write_wav,
)

__version__ = "0.1.0"
