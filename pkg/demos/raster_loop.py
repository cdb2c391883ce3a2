"""Render eye rasters, segment them, and recover the pupil-iris ratio.

Run with ``python3 demos/raster_loop.py``.
"""

from datetime import datetime

import numpy as np

from pupilpipe.core import BurstSession, EyeSide, FrameRecord
from pupilpipe.pir import estimate_session_pir
from pupilpipe.synthetic import EyeRasterSpec, render_eye_raster, segment_raster


def recover(spec, seed=0):
    dets = segment_raster(render_eye_raster(spec, seed))
    fr = FrameRecord("DEMO", "s", EyeSide.LEFT, datetime(2024, 1, 1), 1.0, tuple(dets))
    return estimate_session_pir(BurstSession("DEMO", "s", EyeSide.LEFT, (fr,))).pir


if __name__ == "__main__":
    print(" true   clean   noisy(sd=8)")
    for pir in np.round(np.arange(0.2, 0.71, 0.1), 2):
        spec = EyeRasterSpec(width=72, height=72, iris_center=(36, 36), iris_radius=30, pir=float(pir))
        noisy = EyeRasterSpec(**{**spec.__dict__, "noise_sd": 8.0})
        print(f" {pir:.2f}   {recover(spec):.3f}   {recover(noisy, seed=1):.3f}")
