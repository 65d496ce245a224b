# phantom.py
import logging

import numpy as np
from scipy.sparse.linalg import LinearOperator

from errors import InvalidArgumentError, InvalidDimensionError

logger = logging.getLogger(__name__)

# intensity, semi-axis a, semi-axis b, centre x, centre y, rotation (degrees)
SHEPP_LOGAN_ELLIPSES = (
    ( 1.0, 0.6900, 0.9200,  0.00,  0.0000,   0),
    (-0.8, 0.6624, 0.8740,  0.00, -0.0184,   0),
    (-0.2, 0.1100, 0.3100,  0.22,  0.0000, -18),
    (-0.2, 0.1600, 0.4100, -0.22,  0.0000,  18),
    ( 0.1, 0.2100, 0.2500,  0.00,  0.3500,   0),
    ( 0.1, 0.0460, 0.0460,  0.00,  0.1000,   0),
    ( 0.1, 0.0460, 0.0460,  0.00, -0.1000,   0),
    ( 0.1, 0.0460, 0.0230, -0.08, -0.6050,   0),
    ( 0.1, 0.0230, 0.0230,  0.00, -0.6060,   0),
    ( 0.1, 0.0230, 0.0460,  0.06, -0.6050,   0),
)


def shepp_logan(h, w):
    """Shepp-Logan phantom as an h x w array with values in [0, 1]."""
    if h < 16 or w < 16:
        raise InvalidDimensionError(f"phantom needs at least 16x16 pixels, got {h}x{w}")
    ys = 1 - (2 * np.arange(h) + 1) / h
    xs = (2 * np.arange(w) + 1) / w - 1
    X, Y = np.meshgrid(xs, ys)
    image = np.zeros((h, w))
    for value, a, b, x0, y0, phi in SHEPP_LOGAN_ELLIPSES:
        t = np.deg2rad(phi)
        xr = (X - x0) * np.cos(t) + (Y - y0) * np.sin(t)
        yr = -(X - x0) * np.sin(t) + (Y - y0) * np.cos(t)
        image[(xr / a) ** 2 + (yr / b) ** 2 <= 1] += value
    return np.clip(image, 0.0, 1.0)


def radial_mask(h, w, lines, offset=0.0):
    """Equiangular lines through DC, in unshifted FFT index order, Hermitian symmetric.

    Each line takes one sample per unit of radius, rounded to the nearest
    frequency, so a line covers about max(h, w) coefficients.
    """
    if lines < 1:
        raise InvalidArgumentError("need at least one radial line")
    centred = np.zeros((h, w), dtype=bool)
    cy, cx = h // 2, w // 2
    radius = max(h, w)
    t = np.arange(-radius, radius + 1)
    for k in range(lines):
        theta = offset + np.pi * k / lines
        rows = np.rint(cy + t * np.sin(theta)).astype(int)
        cols = np.rint(cx + t * np.cos(theta)).astype(int)
        inside = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
        centred[rows[inside], cols[inside]] = True
    mask = np.fft.ifftshift(centred)
    mirrored = np.roll(np.flip(mask, axis=(0, 1)), 1, axis=(0, 1))
    return mask | mirrored


class RadialFourierOperator(LinearOperator):
    """Masked unitary 2-D DFT with real and imaginary parts stacked.

    Maps a raveled h x w real image to 2n reals for n sampled frequencies.
    """

    def __init__(self, h, w, lines=None, seed=None, mask=None):
        if mask is None:
            offset = 0.0
            if seed is not None:
                offset = np.random.default_rng(seed).uniform(0, np.pi / lines)
            mask = radial_mask(h, w, lines, offset)
        self.h, self.w = h, w
        self.mask  = np.asarray(mask, dtype=bool)
        self.lines = lines
        self._idx  = np.flatnonzero(self.mask.ravel())
        self.n     = self._idx.size
        super().__init__(dtype=float, shape=(2 * self.n, h * w))

    @property
    def measurement_fraction(self):
        return self.n / (self.h * self.w)

    def _matvec(self, x):
        coeffs = np.fft.fft2(np.reshape(x, (self.h, self.w)), norm="ortho").ravel()[self._idx]
        return np.concatenate([coeffs.real, coeffs.imag])

    def _rmatvec(self, u):
        u = np.ravel(u)
        spectrum = np.zeros(self.h * self.w, dtype=complex)
        spectrum[self._idx] = u[: self.n] + 1j * u[self.n :]
        return np.real(np.fft.ifft2(spectrum.reshape(self.h, self.w), norm="ortho")).ravel()

    def zero_fill(self, y):
        return self.rmatvec(y)
