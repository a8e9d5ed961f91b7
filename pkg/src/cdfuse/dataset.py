"""Paired-image directories: ``<stem>_a.<ext>`` next to ``<stem>_b.<ext>``."""

from __future__ import annotations

from pathlib import Path

from .color import decode_image, rgb_to_ycbcr

__all__ = ["IMAGE_SUFFIXES", "find_pairs", "load_luminance_pairs"]

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm", ".pnm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def _by_stem(directory: Path, tag: str) -> dict[str, Path]:
    out = {}
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() in IMAGE_SUFFIXES and p.stem.endswith(tag):
            out[p.stem[: -len(tag)]] = p
    return out


def find_pairs(directory, extra: str | None = None) -> list[tuple]:
    """Sorted ``(stem, path_a, path_b[, path_extra])`` tuples for complete pairs.

    With ``extra="f"`` the matching ``<stem>_f.<ext>`` file is appended (or
    ``None`` when it is missing).
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    a, b = _by_stem(directory, "_a"), _by_stem(directory, "_b")
    tagged = _by_stem(directory, f"_{extra}") if extra else {}
    pairs = []
    for stem in sorted(a.keys() & b.keys()):
        item = (stem, a[stem], b[stem])
        if extra:
            item += (tagged.get(stem),)
        pairs.append(item)
    return pairs


def load_luminance_pairs(directory) -> list[tuple]:
    """``(x, y)`` luminance planes, each ``(1, H, W)``, for every pair in ``directory``."""
    out = []
    for _, pa, pb in find_pairs(directory):
        out.append((rgb_to_ycbcr(decode_image(pa)).y, rgb_to_ycbcr(decode_image(pb)).y))
    return out
