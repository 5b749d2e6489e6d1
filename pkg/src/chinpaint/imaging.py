"""Grayscale image ingestion and phase-field conversion.

Gray values live in [0, 1] with 1 = black region of the binary image.
The phase mapping sends gray >= threshold to +m_star, gray < threshold
to -m_star, and damaged pixels to 0 (the zero extension).  Writing
inverts the map, u = clip(phi/m_star, -1, 1)/2 + 1/2, quantized to
8 bits with round-half-up, so a zero phase lands on gray level 128.

Supported formats: PGM P2 (ASCII) and P5 (binary), and 8-bit grayscale
PNG.  Image row r, column c maps to grid row j = r, column i = c.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .errors import (
    DimensionMismatchError,
    EmptyOrFullMaskError,
    UnsupportedFormatError,
    ValidationError,
)
from .spectral import Field, Grid

__all__ = [
    "load_image",
    "load_mask",
    "binarize_to_phase",
    "initial_guess",
    "write_phase_image",
]


def _read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] not in (b"P2", b"P5"):
        raise UnsupportedFormatError(f"{path}: not a PGM P2/P5 file")
    binary = data[:2] == b"P5"

    # tokenize the header, honoring '#' comments
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise UnsupportedFormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    width, height, maxval = (int(t) for t in tokens)
    if maxval <= 0 or maxval > 65535:
        raise UnsupportedFormatError(f"{path}: bad maxval {maxval}")

    if binary:
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        count = width * height
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    else:
        arr = np.array(data[pos:].split(), dtype=np.int64)
        if arr.size != width * height:
            raise UnsupportedFormatError(f"{path}: pixel count mismatch")
    return arr.reshape(height, width).astype(np.float64) / maxval


def _read_png(path: str) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode != "L":
            img = img.convert("L")
        arr = np.asarray(img, dtype=np.float64)
    return arr / 255.0


def _read_gray(path: str) -> np.ndarray:
    ext = os.path.splitext(path)[1].lower()
    if ext == ".pgm":
        return _read_pgm(path)
    if ext == ".png":
        return _read_png(path)
    raise UnsupportedFormatError(f"{path}: unsupported extension {ext!r}")


def load_image(path: str, grid: Grid) -> Field:
    """Load a grayscale image as a field with values in [0, 1]."""
    arr = _read_gray(path)
    if arr.shape != grid.shape:
        raise DimensionMismatchError(
            f"{path}: image is {arr.shape[1]}x{arr.shape[0]}, grid wants {grid.nx}x{grid.ny}"
        )
    return Field.from_matrix(grid, arr)


def load_mask(path: str, grid: Grid) -> Field:
    """Load the damage indicator, thresholding gray at 0.5.

    Rejects masks that cover nothing or everything.
    """
    arr = _read_gray(path)
    if arr.shape != grid.shape:
        raise DimensionMismatchError(
            f"{path}: mask is {arr.shape[1]}x{arr.shape[0]}, grid wants {grid.nx}x{grid.ny}"
        )
    mask = (arr >= 0.5).astype(np.float64)
    covered = mask.sum()
    if covered == 0 or covered == mask.size:
        raise EmptyOrFullMaskError(f"{path}: damage mask covers {int(covered)} of {mask.size} pixels")
    return Field.from_matrix(grid, mask)


def binarize_to_phase(img: Field, m_star: float, threshold: float = 0.5, mask_d: Field | None = None) -> Field:
    """Map gray levels to the pure phases, zero on the damaged region."""
    if not (0.0 < threshold < 1.0):
        raise ValidationError(f"binarize threshold must lie in (0, 1), got {threshold}")
    vals = np.where(img.values >= threshold, m_star, -m_star)
    if mask_d is not None:
        vals = vals * (1.0 - mask_d.values)
    return Field(img.grid, vals)


def initial_guess(f_phase: Field, mask_d: Field, blur_sigma: float) -> Field:
    """Gaussian blur of the zero-extended phase image.

    ``blur_sigma`` is in pixels; the kernel reflects at the boundary and
    truncates at 4 sigma.  The result is shrunk by (1 - 1e-6) so its
    sup-norm stays strictly below 1, and its mean must lie strictly
    inside (-1, 1).
    """
    if blur_sigma < 0:
        raise ValidationError("blur_sigma must be nonnegative")
    mat = (f_phase.values * (1.0 - mask_d.values)).reshape(f_phase.grid.shape)
    if blur_sigma > 0:
        mat = gaussian_filter(mat, sigma=blur_sigma, mode="reflect", truncate=4.0)
    mat = mat * (1.0 - 1e-6)
    out = Field.from_matrix(f_phase.grid, mat)
    m = float(out.values.mean())
    if not (-1.0 < m < 1.0):
        raise ValidationError(f"initial guess mean {m} is not strictly inside (-1, 1)")
    return out


def _quantize(phi: Field, m_star: float) -> np.ndarray:
    u = 0.5 * np.clip(phi.values / m_star, -1.0, 1.0) + 0.5
    q = np.floor(u * 255.0 + 0.5)  # round half up
    return np.clip(q, 0, 255).astype(np.uint8).reshape(phi.grid.shape)


def write_phase_image(phi: Field, path: str, m_star: float, plain: bool = False) -> None:
    """Write a phase field as an 8-bit grayscale image.

    Extension selects the format (.pgm or .png); ``plain`` switches PGM
    output to the ASCII P2 flavor.
    """
    arr = _quantize(phi, m_star)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".pgm":
        h, w = arr.shape
        if plain:
            rows = "\n".join(" ".join(str(v) for v in row) for row in arr)
            payload = f"P2\n{w} {h}\n255\n{rows}\n".encode("ascii")
        else:
            payload = f"P5\n{w} {h}\n255\n".encode("ascii") + arr.tobytes()
        with open(path, "wb") as fh:
            fh.write(payload)
    elif ext == ".png":
        Image.fromarray(arr, mode="L").save(path)
    else:
        raise UnsupportedFormatError(f"{path}: unsupported extension {ext!r}")
