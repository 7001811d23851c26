"""
Image ingestion, Gabor S1 filtering, band preparation and occlusion.

Images are plain 2-D ``float64`` numpy arrays with intensities in [0, 1];
:func:`as_image` validates and normalises anything array-like into that form.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from scipy import ndimage, signal

from .errors import IngestError, InvalidInputError, InvalidParameterError

ORIENTATIONS = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)
BANDS = ("lsf", "isf", "hsf", "full")


def as_image(pixels) -> np.ndarray:
    """Return ``pixels`` as a validated 2-D float image in [0, 1]."""
    img = np.asarray(pixels, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError(f"image must be 2-D, got shape {img.shape}")
    if img.size == 0:
        raise InvalidInputError("image has zero area")
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise InvalidInputError("image intensities must lie in [0, 1]")
    return img


def load_grayscale(path, target_size: int = 128) -> np.ndarray:
    """
    Read a raster file as a square grayscale image of side ``target_size``.

    Colour channels are averaged with equal weight; integer rasters are divided
    by their dtype maximum so that full-scale white maps to 1.0. Resizing is
    bilinear and skipped when the raster already has the target shape.
    """
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            im.load()
            raw = np.asarray(im)
            mode = im.mode
    except (OSError, UnidentifiedImageError) as exc:
        raise IngestError(path, str(exc)) from exc
    if raw.size == 0 or min(raw.shape[:2]) == 0:
        raise InvalidInputError(f"{path}: zero-area image")

    if mode in ("1",):
        scale = 1.0
    elif np.issubdtype(raw.dtype, np.integer):
        scale = float(np.iinfo(raw.dtype).max)
    else:
        scale = 1.0
    arr = raw.astype(np.float64) / scale
    if arr.ndim == 3:
        # drop alpha before averaging
        if arr.shape[2] in (2, 4):
            arr = arr[..., :-1]
        arr = arr.mean(axis=2)

    if arr.shape != (target_size, target_size):
        resized = PILImage.fromarray(arr.astype(np.float32), mode="F").resize(
            (target_size, target_size), PILImage.BILINEAR)
        arr = np.asarray(resized, dtype=np.float64)
    return np.clip(arr, 0.0, 1.0)


def save_image(img: np.ndarray, path) -> None:
    """Write an image as an 8-bit grayscale PNG (or any PIL-supported suffix)."""
    img = as_image(img)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(np.round(img * 255).astype(np.uint8), mode="L").save(path)


# ---------------------------------------------------------------------------
# Gabor S1 filters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelBank:
    """Four zero-DC Gabor kernels sharing one odd window size."""

    window: int
    orientations: tuple
    kernels: np.ndarray  # (4, window, window)

    def __len__(self):
        return len(self.kernels)


def gabor_kernel(window: int, orientation: float, wavelength=None, sigma=None,
                 gamma: float = 0.5, phase: float = 0.0) -> np.ndarray:
    """
    Even-symmetric Gabor kernel tuned to edges running along ``orientation``.

    ``orientation`` is the direction of the preferred edge measured from the
    image x-axis (columns), so 0 responds to horizontal structure and pi/2 to
    vertical structure. Wavelength defaults to ``window / 2`` and the envelope
    width to ``0.8 * wavelength``. The truncated kernel is mean-subtracted and
    scaled to unit L2 norm.
    """
    _check_window(window)
    lam = window / 2.0 if wavelength is None else float(wavelength)
    sig = 0.8 * lam if sigma is None else float(sigma)
    half = window // 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    # u runs across the preferred edge, v along it
    u = -x * np.sin(orientation) + y * np.cos(orientation)
    v = x * np.cos(orientation) + y * np.sin(orientation)
    g = np.exp(-(u ** 2 + (gamma * v) ** 2) / (2.0 * sig ** 2)) * np.cos(2.0 * np.pi * u / lam + phase)
    g -= g.mean()
    norm = np.sqrt(np.sum(g ** 2))
    if norm > 0:
        g /= norm
    return g


def make_gabor_bank(window: int) -> KernelBank:
    _check_window(window)
    kernels = np.stack([gabor_kernel(window, th) for th in ORIENTATIONS])
    return KernelBank(window=window, orientations=ORIENTATIONS, kernels=kernels)


def _check_window(window):
    if int(window) != window or window < 3 or window % 2 == 0:
        raise InvalidParameterError(f"Gabor window must be an odd integer >= 3, got {window!r}")


def convolve(image: np.ndarray, bank: KernelBank) -> np.ndarray:
    """
    Convolve ``image`` with every kernel of ``bank``.

    Returns a ``(4, rows, cols)`` stack of signed responses, same spatial size
    as the image. The frame is extended by mirror reflection so that uniform
    regions touching the border respond with zero, like uniform interiors.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError(f"image must be 2-D, got shape {img.shape}")
    if min(img.shape) < bank.window:
        raise InvalidInputError(
            f"image {img.shape} is smaller than the {bank.window}x{bank.window} kernel")
    return np.stack([signal.convolve2d(img, k, mode="same", boundary="symm")
                     for k in bank.kernels])


# ---------------------------------------------------------------------------
# Spatial-frequency bands
# ---------------------------------------------------------------------------

def dog_bandpass(image: np.ndarray, window: int) -> np.ndarray:
    """Difference-of-Gaussians band-pass with cutoffs tied to a Gabor window size.

    Returns the signed band component (fine blur minus coarse blur); constant
    images map to zero.
    """
    img = np.asarray(image, dtype=np.float64)
    fine = ndimage.gaussian_filter(img, sigma=window / 6.0, mode="nearest")
    coarse = ndimage.gaussian_filter(img, sigma=window / 2.0, mode="nearest")
    return fine - coarse


def band_image(image: np.ndarray, band: str, window: int, prefilter: bool = False) -> np.ndarray:
    """
    Route an image to a spatial-frequency band.

    By default the band is carried entirely by the S1 window the caller pairs
    with it, and the image passes through unchanged. With ``prefilter=True``
    an explicit DoG band-pass (:func:`dog_bandpass`) is applied and the result
    is re-centred on mid-gray and clamped to [0, 1]. The ``"full"`` band is
    always a pass-through.
    """
    band = band.lower()
    if band not in BANDS:
        raise InvalidParameterError(f"unknown band {band!r}; expected one of {BANDS}")
    img = as_image(image)
    if band == "full" or not prefilter:
        return img
    return np.clip(0.5 + dog_bandpass(img, window), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Occlusion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OcclusionSpec:
    blob_count: int
    blob_radius: float
    softness_sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.blob_count < 0:
            raise InvalidParameterError("blob_count must be non-negative")
        if self.blob_count > 0 and self.blob_radius <= 0:
            raise InvalidParameterError("blob_radius must be positive when blobs are requested")
        if self.softness_sigma < 0:
            raise InvalidParameterError("softness_sigma must be non-negative")

    @classmethod
    def with_defaults(cls, side: int, blob_count: int, seed: int = 0):
        """Radius ``side / 8`` and softness ``radius / 3``."""
        radius = side / 8.0
        return cls(blob_count, radius, radius / 3.0, seed)


def occlusion_mask(shape, spec: OcclusionSpec) -> np.ndarray:
    """Per-pixel mixing coefficient toward mid-gray (1 inside a blob, Gaussian falloff outside)."""
    rows, cols = shape
    mask = np.zeros(shape, dtype=np.float64)
    if spec.blob_count == 0:
        return mask
    rng = np.random.default_rng(spec.seed)
    centers = rng.uniform(low=(0.0, 0.0), high=(rows, cols), size=(spec.blob_count, 2))
    rr, cc = np.mgrid[0:rows, 0:cols].astype(np.float64)
    for cy, cx in centers:
        d = np.hypot(rr - cy, cc - cx)
        outside = np.maximum(d - spec.blob_radius, 0.0)
        if spec.softness_sigma > 0:
            m = np.exp(-outside ** 2 / (2.0 * spec.softness_sigma ** 2))
        else:
            m = (outside == 0).astype(np.float64)
        np.maximum(mask, m, out=mask)
    return mask


def occlude(image: np.ndarray, spec: OcclusionSpec) -> np.ndarray:
    """Mask ``spec.blob_count`` soft circular blobs of the image toward 0.5."""
    img = as_image(image)
    if spec.blob_count == 0:
        return img.copy()
    m = occlusion_mask(img.shape, spec)
    return np.clip(m * 0.5 + (1.0 - m) * img, 0.0, 1.0)
