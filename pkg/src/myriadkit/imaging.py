"""Image containers, noise synthesis, quality metrics and file I/O.

Two raster types: real-valued ``Image`` (with a dynamic-range ``peak``,
default 255) and circle-valued ``S1Image`` (angles in [-pi, pi)).  Noise
generators intentionally do not clip: heavy-tailed outliers must survive
for the downstream filters to be exercised; use :func:`clip_image` when a
display range is needed.

File formats: binary PGM (P5, maxval 255 or 65535, two-byte samples
big-endian) and a raw float grid "MYR1" with a 24-byte header
(magic ``MYR1``, u32 width, u32 height, u32 kind, u64 reserved, all
little-endian; kind 0 = real, 1 = circular), payload little-endian f64,
row-major.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidNu,
    IoFailure,
    KindMismatch,
    MalformedHeader,
    ShapeMismatch,
    TooSmall,
)
from .distributions import wrap_angle

__all__ = [
    "Image",
    "S1Image",
    "add_student_t_noise",
    "add_wrapped_cauchy_noise",
    "clip_image",
    "psnr",
    "ssim",
    "s1_mse",
    "read_pgm",
    "write_pgm",
    "read_f64",
    "write_f64",
    "synthetic_blocks",
    "synthetic_s1_blocks",
]


@dataclass
class Image:
    """Real-valued raster; ``pixels`` is a (height, width) float array."""

    pixels: np.ndarray
    peak: float = 255.0

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected a (height, width) array, got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("pixel values must be finite")
        if not (self.peak > 0):
            raise ValueError("peak must be positive")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class S1Image:
    """Circle-valued raster; ``angles`` lie in [-pi, pi)."""

    angles: np.ndarray

    def __post_init__(self):
        ang = np.asarray(self.angles, dtype=np.float64)
        if ang.ndim != 2 or ang.shape[0] < 1 or ang.shape[1] < 1:
            raise ValueError(f"expected a (height, width) array, got {ang.shape}")
        if not np.all(np.isfinite(ang)):
            raise ValueError("angles must be finite")
        if np.any(ang < -math.pi) or np.any(ang >= math.pi):
            raise ValueError("angles must lie in [-pi, pi)")
        self.angles = ang

    @property
    def height(self) -> int:
        return self.angles.shape[0]

    @property
    def width(self) -> int:
        return self.angles.shape[1]


# ---------------------------------------------------------------------------
# noise synthesis
# ---------------------------------------------------------------------------


def add_student_t_noise(u: Image, nu: float, sigma: float, seed: int) -> Image:
    """Per-pixel additive noise sigma * z / sqrt(y), z standard normal and
    y Gamma(nu/2, rate nu/2); nu = 1 gives Cauchy noise.  No clipping."""
    if nu < 1:
        raise InvalidNu("noise model requires nu >= 1")
    if not (sigma > 0):
        raise ValueError("sigma must be positive")
    rng = np.random.default_rng(seed)
    shape = u.pixels.shape
    z = rng.standard_normal(shape)
    y = rng.gamma(shape=0.5 * nu, scale=2.0 / nu, size=shape)
    return Image(u.pixels + sigma * z / np.sqrt(y), peak=u.peak)


def add_wrapped_cauchy_noise(u: S1Image, gamma: float, seed: int) -> S1Image:
    """Per-pixel wrapped Cauchy perturbation with scale gamma
    (concentration rho = exp(-gamma)), renormalized to [-pi, pi)."""
    if not (gamma > 0):
        raise ValueError("gamma must be positive")
    rng = np.random.default_rng(seed)
    eta = gamma * np.tan(math.pi * (rng.random(u.angles.shape) - 0.5))
    return S1Image(wrap_angle(u.angles + eta))


def clip_image(u: Image) -> Image:
    """Clamp pixel values into [0, peak] (separate op; noise is never clipped)."""
    return Image(np.clip(u.pixels, 0.0, u.peak), peak=u.peak)


# ---------------------------------------------------------------------------
# quality metrics
# ---------------------------------------------------------------------------


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")


def psnr(ref: Image, test: Image) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images.
    Uses the declared peak of the reference, not the observed maximum."""
    _check_same_shape(ref.pixels, test.pixels)
    mse = float(np.mean((ref.pixels - test.pixels) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(ref.peak**2 / mse)


def _gaussian_window(size=11, sigma=1.5):
    half = (size - 1) / 2.0
    g = np.exp(-0.5 * ((np.arange(size) - half) / sigma) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def ssim(ref: Image, test: Image) -> float:
    """Mean local structural similarity, 11x11 Gaussian window (sigma 1.5),
    C1 = (0.01 peak)^2, C2 = (0.03 peak)^2, valid-region average."""
    _check_same_shape(ref.pixels, test.pixels)
    if min(ref.pixels.shape) < 11:
        raise TooSmall("ssim needs images at least 11 pixels on each side")
    k = _gaussian_window()
    x = ref.pixels
    y = test.pixels

    def win_mean(img):
        v = np.lib.stride_tricks.sliding_window_view(img, (11, 11))
        return np.einsum("ijkl,kl->ij", v, k)

    mu_x = win_mean(x)
    mu_y = win_mean(y)
    xx = win_mean(x * x) - mu_x**2
    yy = win_mean(y * y) - mu_y**2
    xy = win_mean(x * y) - mu_x * mu_y
    c1 = (0.01 * ref.peak) ** 2
    c2 = (0.03 * ref.peak) ** 2
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def s1_mse(ref: S1Image, test: S1Image) -> float:
    """Mean squared geodesic angular distance between two circle-valued
    images (the reconstruction error used for S1 denoising)."""
    _check_same_shape(ref.angles, test.angles)
    diff = np.abs(wrap_angle(ref.angles - test.angles))
    return float(np.mean(diff**2))


# ---------------------------------------------------------------------------
# PGM (P5) I/O
# ---------------------------------------------------------------------------


def _read_pgm_tokens(data: bytes, count: int):
    """First `count` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise MalformedHeader("unexpected end of header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise MalformedHeader("unterminated comment")
            pos = nl + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    return tokens, pos + 1  # single whitespace after maxval precedes payload


def read_pgm(path) -> Image:
    """Read a binary (P5) PGM with maxval 255 or 65535."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if not data.startswith(b"P5"):
        raise MalformedHeader("not a binary PGM (missing P5 magic)")
    tokens, payload_at = _read_pgm_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MalformedHeader(f"non-numeric header field: {exc}") from exc
    if width < 1 or height < 1:
        raise MalformedHeader("non-positive image dimensions")
    if maxval == 255:
        dtype = np.dtype(">u1")
    elif maxval == 65535:
        dtype = np.dtype(">u2")  # two-byte samples are big-endian
    else:
        raise MalformedHeader(f"unsupported maxval {maxval}")
    expected = width * height * dtype.itemsize
    payload = data[payload_at : payload_at + expected]
    if len(payload) != expected:
        raise MalformedHeader(
            f"truncated payload: expected {expected} bytes, got {len(payload)}"
        )
    px = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return Image(px.astype(np.float64), peak=float(maxval))


def write_pgm(img: Image, path, maxval: int | None = None) -> int:
    """Write a binary PGM; values are clamped to [0, peak], rescaled to the
    maxval range when maxval differs from peak, and rounded half-to-even.
    Returns the number of clamped pixels."""
    if maxval is None:
        maxval = 255 if img.peak <= 255 else 65535
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    clipped = np.clip(img.pixels, 0.0, img.peak)
    clamped = int(np.count_nonzero(clipped != img.pixels))
    scaled = clipped * (maxval / img.peak)
    quantized = np.rint(scaled)  # rint rounds half to even
    dtype = np.dtype(">u1") if maxval == 255 else np.dtype(">u2")
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(quantized.astype(dtype).tobytes())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return clamped


# ---------------------------------------------------------------------------
# MYR1 raw float I/O
# ---------------------------------------------------------------------------

_MYR1_MAGIC = b"MYR1"
_MYR1_HEADER = struct.Struct("<4sIIIQ")  # magic, width, height, kind, reserved
KIND_REAL = 0
KIND_CIRCULAR = 1


def write_f64(img, path) -> None:
    """Write an Image (kind 0) or S1Image (kind 1) as a raw f64 grid."""
    if isinstance(img, Image):
        kind, values = KIND_REAL, img.pixels
    elif isinstance(img, S1Image):
        kind, values = KIND_CIRCULAR, img.angles
    else:
        raise TypeError(f"expected Image or S1Image, got {type(img)!r}")
    header = _MYR1_HEADER.pack(
        _MYR1_MAGIC, values.shape[1], values.shape[0], kind, 0
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(values.astype("<f8").tobytes())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_f64(path, expect: str | None = None):
    """Read a MYR1 grid; returns Image or S1Image according to the header.

    ``expect`` may be "real" or "circular" to insist on a kind
    (KindMismatch otherwise).  Non-finite payload values are rejected with
    the position of the first offender.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(data) < _MYR1_HEADER.size:
        raise MalformedHeader("file shorter than the MYR1 header")
    magic, width, height, kind, _ = _MYR1_HEADER.unpack_from(data)
    if magic != _MYR1_MAGIC:
        raise MalformedHeader(f"bad magic {magic!r}")
    if kind not in (KIND_REAL, KIND_CIRCULAR):
        raise MalformedHeader(f"unknown kind {kind}")
    if width < 1 or height < 1:
        raise MalformedHeader("non-positive image dimensions")
    expected = width * height * 8
    payload = data[_MYR1_HEADER.size :]
    if len(payload) != expected:
        raise MalformedHeader(
            f"payload size {len(payload)} does not match {width}x{height} f64 grid"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(height, width).copy()
    bad = ~np.isfinite(values)
    if np.any(bad):
        r, c = np.argwhere(bad)[0]
        raise MalformedHeader(f"non-finite value at row {r}, col {c}")
    if expect == "real" and kind != KIND_REAL:
        raise KindMismatch("file stores a circular image")
    if expect == "circular" and kind != KIND_CIRCULAR:
        raise KindMismatch("file stores a real image")
    if kind == KIND_REAL:
        return Image(values)
    # wrap only out-of-range angles so in-range payloads round-trip bit-exactly
    out = (values < -math.pi) | (values >= math.pi)
    if np.any(out):
        values[out] = wrap_angle(values[out])
    return S1Image(values)


# ---------------------------------------------------------------------------
# synthetic test scenes
# ---------------------------------------------------------------------------


def synthetic_blocks(size: int = 128, peak: float = 255.0) -> Image:
    """Piecewise-constant test scene: flat background with rectangles,
    a disk and a triangle at distinct gray levels."""
    img = np.full((size, size), 0.25 * peak)
    rr, cc = np.mgrid[0:size, 0:size]
    s = size / 128.0

    def box(r0, r1, c0, c1, val):
        img[int(r0 * s) : int(r1 * s), int(c0 * s) : int(c1 * s)] = val

    box(10, 50, 10, 50, 0.85 * peak)
    box(20, 40, 70, 120, 0.55 * peak)
    box(95, 120, 8, 60, 0.05 * peak)
    disk = (rr - 88 * s) ** 2 + (cc - 92 * s) ** 2 <= (22 * s) ** 2
    img[disk] = 0.70 * peak
    tri = (rr >= 58 * s) & (rr <= 86 * s) & (cc >= 12 * s) & (cc - 12 * s <= rr - 58 * s)
    img[tri] = 0.40 * peak
    return Image(img, peak=peak)


def synthetic_s1_blocks(size: int = 128) -> S1Image:
    """Piecewise-constant circle-valued scene: two large shapes on a flat
    background, phases roughly 1.2 rad apart."""
    ang = np.full((size, size), -2.8)
    rr, cc = np.mgrid[0:size, 0:size]
    s = size / 128.0
    ang[int(16 * s) : int(80 * s), int(12 * s) : int(76 * s)] = -1.6
    disk = (rr - 96 * s) ** 2 + (cc - 96 * s) ** 2 <= (24 * s) ** 2
    ang[disk] = -0.4
    return S1Image(ang)
