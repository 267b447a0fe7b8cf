"""Physical constants and the single home for dB/linear conversion."""

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact


def db_to_lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def lin_to_db(lin):
    return 10.0 * np.log10(np.asarray(lin, dtype=float))


def sinc(x):
    """Unnormalized sinc, sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def as_scalar(x):
    """Return a Python float for 0-d results, leave arrays alone."""
    arr = np.asarray(x)
    return float(arr) if arr.ndim == 0 else arr
