# app/services/image_ops.py
"""
Raster primitives shared by table detection and structure recognition:
adaptive binarization, morphological line extraction and ink boxes.
Masks are uint8 with 255 = ink, 0 = blank.
"""

import math
from typing import List, Optional, Tuple

import cv2
import numpy as np

from app.core.config import Settings, settings
from app.core.errors import DegenerateRegionError
from app.models.geometry import Rect
from app.models.table import BinaryImage, RulingLines, Segment

# collinear pieces of one rule closer than this are joined
SEGMENT_JOIN_GAP_PX = 3
SEGMENT_JOIN_DRIFT_PX = 2


def binarize(gray: np.ndarray, origin: Tuple[int, int] = (0, 0), px_per_pt: float = 300.0 / 72.0,
             cfg: Optional[Settings] = None) -> BinaryImage:
    cfg = cfg or settings
    if gray.ndim != 2:
        raise DegenerateRegionError("expected a 2-D grayscale region")
    h, w = gray.shape
    if h <= 2 or w <= 2:
        raise DegenerateRegionError(f"region {w}x{h} px is too small to binarize")
    gray = np.ascontiguousarray(gray, dtype=np.uint8)

    window = max(3, math.ceil(min(h, w) / cfg.THRESH_WINDOW_DIVISOR))
    if window % 2 == 0:
        window += 1
    mask = cv2.adaptiveThreshold(
        gray, 255, cv2.ADAPTIVE_THRESH_MEAN_C, cv2.THRESH_BINARY_INV, window, cfg.THRESH_OFFSET
    )
    # local-mean thresholding sees nothing inside uniform dark areas
    mask[gray <= cfg.DARK_LEVEL] = 255
    return BinaryImage(width_px=w, height_px=h, bits=mask, origin=origin, px_per_pt=px_per_pt)


def open_lines(mask: np.ndarray, length: int, horizontal: bool) -> np.ndarray:
    """Pixels lying on a straight horizontal (or vertical) ink run of at least `length`."""
    length = max(1, int(length))
    size = (length, 1) if horizontal else (1, length)
    kernel = cv2.getStructuringElement(cv2.MORPH_RECT, size)
    return cv2.morphologyEx(mask, cv2.MORPH_OPEN, kernel, borderType=cv2.BORDER_CONSTANT, borderValue=0)


def line_segments(line_mask: np.ndarray, horizontal: bool, min_length: int) -> List[Segment]:
    n, labels, stats, _ = cv2.connectedComponentsWithStats(line_mask, connectivity=8)
    raw: List[Segment] = []
    for i in range(1, n):
        x, y, w, h = (int(v) for v in stats[i, :4])
        comp = labels[y:y + h, x:x + w] == i
        if horizontal:
            rows = np.flatnonzero(comp.sum(axis=1))
            pos = y + int(round(float(np.average(rows, weights=comp.sum(axis=1)[rows]))))
            raw.append(Segment(pos=pos, start=x, end=x + w - 1, support=int(comp.any(axis=0).sum())))
        else:
            cols = np.flatnonzero(comp.sum(axis=0))
            pos = x + int(round(float(np.average(cols, weights=comp.sum(axis=0)[cols]))))
            raw.append(Segment(pos=pos, start=y, end=y + h - 1, support=int(comp.any(axis=1).sum())))

    raw.sort(key=lambda s: (s.pos, s.start))
    merged: List[Segment] = []
    for seg in raw:
        joined = False
        for k, cur in enumerate(merged):
            if abs(cur.pos - seg.pos) > SEGMENT_JOIN_DRIFT_PX:
                continue
            if seg.start - cur.end - 1 <= SEGMENT_JOIN_GAP_PX and cur.start - seg.end - 1 <= SEGMENT_JOIN_GAP_PX:
                merged[k] = Segment(
                    pos=cur.pos if cur.support >= seg.support else seg.pos,
                    start=min(cur.start, seg.start),
                    end=max(cur.end, seg.end),
                    support=cur.support + seg.support,
                )
                joined = True
                break
        if not joined:
            merged.append(seg)
    out = [s for s in merged if s.length >= min_length]
    out.sort(key=lambda s: (s.pos, s.start))
    return out


def extract_lines(bin_img: BinaryImage, cfg: Optional[Settings] = None) -> RulingLines:
    cfg = cfg or settings
    w, h = bin_img.width_px, bin_img.height_px
    kx = max(15, w // 20)
    ky = max(15, h // 20)
    h_mask = open_lines(bin_img.bits, kx, horizontal=True)
    v_mask = open_lines(bin_img.bits, ky, horizontal=False)
    return RulingLines(
        width_px=w,
        height_px=h,
        horizontal=line_segments(h_mask, True, cfg.LINE_MIN_LENGTH_PX),
        vertical=line_segments(v_mask, False, cfg.LINE_MIN_LENGTH_PX),
        h_mask=h_mask,
        v_mask=v_mask,
    )


def text_mask(bin_img: BinaryImage, lines: RulingLines) -> np.ndarray:
    """Ink that is not part of a ruling line."""
    mask = bin_img.bits.copy()
    if lines.h_mask is not None:
        mask[lines.h_mask > 0] = 0
    if lines.v_mask is not None:
        mask[lines.v_mask > 0] = 0
    return mask


def ink_boxes(mask: np.ndarray, join_px: int) -> List[Rect]:
    """
    Bounding boxes of ink groups; components closer than `join_px`
    horizontally are one group (a word or a number with its sign).
    """
    if not mask.any():
        return []
    join_px = max(1, int(join_px))
    joined = cv2.dilate(mask, cv2.getStructuringElement(cv2.MORPH_RECT, (join_px, 1)))
    n, labels, stats, _ = cv2.connectedComponentsWithStats(joined, connectivity=8)
    boxes: List[Rect] = []
    ink = mask > 0
    for i in range(1, n):
        x, y, w, h = (int(v) for v in stats[i, :4])
        ys, xs = np.nonzero((labels[y:y + h, x:x + w] == i) & ink[y:y + h, x:x + w])
        if xs.size == 0:
            continue
        boxes.append(Rect(x0=x + int(xs.min()), y0=y + int(ys.min()),
                          x1=x + int(xs.max()) + 1, y1=y + int(ys.max()) + 1))
    boxes.sort(key=lambda r: (r.y0, r.x0))
    return boxes


def crop_rect(pixels: np.ndarray, rect: Rect) -> Tuple[np.ndarray, Rect]:
    """Crop to the integer pixel rectangle enclosing `rect`; returns the crop and that rectangle."""
    h, w = pixels.shape[:2]
    x0, y0 = max(0, int(math.floor(rect.x0))), max(0, int(math.floor(rect.y0)))
    x1, y1 = min(w, int(math.ceil(rect.x1))), min(h, int(math.ceil(rect.y1)))
    return pixels[y0:y1, x0:x1], Rect(x0=x0, y0=y0, x1=max(x0, x1), y1=max(y0, y1))
