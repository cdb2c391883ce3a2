"""Pupil-iris ratio pipeline: burst frames to PIR samples, daily features, LOPO evaluation."""

__version__ = "0.1.0"
