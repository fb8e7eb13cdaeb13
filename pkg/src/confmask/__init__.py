"""Conformal confidence masks for images restored by black-box generative models.

Typical use::

    from confmask import (CalibrationPair, ScoreConfig, calibrate_dp, make_mask,
                          score_from_draws, d_pointwise, srgb_to_lab_normalized)

    pairs = [CalibrationPair(score_i, d_i) for score_i, d_i in ...]
    t = calibrate_dp(pairs, alpha=0.1)
    trusted = make_mask(score_new, t)
"""

from .calibrate import (
    CalibrationMode,
    CalibrationPair,
    CalibrationRecord,
    RecordMismatchError,
    calibrate_bruteforce,
    calibrate_dp,
    empirical_risk,
    load_record,
    make_mask,
    save_record,
)
from .fidelity import (
    FidelityMetricSpec,
    compute_fidelity,
    d_neighborhood,
    d_pointwise,
    d_semantic,
    fidelity_error,
)
from .imagecore import (
    LAB_NORMALIZATION,
    downsample_box,
    load_floatmap,
    load_png,
    save_floatmap,
    save_png,
    srgb_to_lab_normalized,
)
from .kernels import Kernel, convolve2d, make_box, make_gaussian
from .metrics import EvalReport, mask_stats, masked_psnr, risk_curve
from .scoremap import ScoreConfig, finalize_score, score_from_draws, sigma_ker, sigma_var
from .synthmodel import MockModel, WorldConfig, gen_pair, mock_upscale

__version__ = "0.1.0"
