"""Skin lesion screening pipeline: dataset curation, deterministic
augmentation, patient-independent folds, transfer-learning classifiers,
ensemble evaluation, and an HTTP screening service."""

__version__ = "0.1.0"
