"""PNG reading/writing for unit-interval float images."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from ..errors import DataError
from ..validation import check_image


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit PNG as float32 (H, W, C) in [0, 1], C in {1, 3}."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            if im.mode == "P":
                im = im.convert("RGB")
            if im.mode not in ("L", "RGB"):
                raise DataError(
                    f"{path}: unsupported image mode {im.mode!r} (need 8-bit L or RGB)")
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except FileNotFoundError as e:
        raise DataError(f"image file not found: {path}") from e
    except OSError as e:
        raise DataError(f"cannot read image {path}: {e}") from e
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return check_image(arr, str(path))


def save_image(image: np.ndarray, path: str | Path) -> None:
    """Write a unit-interval image as an 8-bit PNG (grayscale or RGB)."""
    img = check_image(image, "image")
    quantised = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if quantised.shape[2] == 1:
        pil = PILImage.fromarray(quantised[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(quantised, mode="RGB")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pil.save(path, format="PNG")


def save_spectrum_png(spectrum, path: str | Path) -> None:
    """Write a spectrum's normalised log-magnitude as a grayscale PNG."""
    lm = spectrum.log_magnitude()
    top = float(lm.max())
    vis = lm / top if top > 0 else lm
    save_image(vis.astype(np.float32)[:, :, None], path)
