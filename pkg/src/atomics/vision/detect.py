"""Reference detector: normalized cross-correlation plus greedy NMS.

The correlation numerator goes through an FFT convolution; the local image
mean/variance normalization uses integral images, so a full-frame search
costs one FFT per template variant. Scores are Pearson correlations
clamped to [0, 1] and are monotone in match quality.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from ..errors import TemplateTooLarge
from ..hal.signals import Frame
from .types import DetClass, Detection
from .templates import Templates

SCORE_THRESHOLD = 0.6
NMS_IOU = 0.3
MAX_PER_CLASS = 24

# the bench carries exactly one fiber per side and one corner fiducial;
# correlation ridges along a fiber's own cladding or the facet never
# outrank the true feature, so singleton caps are exact
DEFAULT_MAX_INSTANCES = {
    DetClass.FIBER_TIP_LEFT: 1,
    DetClass.FIBER_TIP_RIGHT: 1,
    DetClass.CHIPLET_EDGE: 1,
}


def _window_sums(img: np.ndarray, th: int, tw: int) -> tuple[np.ndarray, np.ndarray]:
    """Sliding-window sum and sum-of-squares via integral images."""
    pad = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(img, axis=0), axis=1, out=pad[1:, 1:])
    s = pad[th:, tw:] - pad[:-th, tw:] - pad[th:, :-tw] + pad[:-th, :-tw]
    pad2 = np.zeros_like(pad)
    np.cumsum(np.cumsum(img.astype(np.float64) ** 2, axis=0), axis=1, out=pad2[1:, 1:])
    s2 = pad2[th:, tw:] - pad2[:-th, tw:] - pad2[th:, :-tw] + pad2[:-th, :-tw]
    return s, s2


def normxcorr(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Valid-mode NCC map; entry (i, j) scores the window whose top-left is
    (j, i) in the image."""
    th, tw = template.shape
    if th > image.shape[0] or tw > image.shape[1]:
        raise TemplateTooLarge(
            f"template {template.shape} larger than image {image.shape}"
        )
    img = image.astype(np.float32)
    t = template.astype(np.float32)
    t0 = t - t.mean()
    t_energy = float((t0 * t0).sum())
    if t_energy <= 0:
        return np.zeros((image.shape[0] - th + 1, image.shape[1] - tw + 1), np.float32)

    num = fftconvolve(img, t0[::-1, ::-1], mode="valid")
    s, s2 = _window_sums(img, th, tw)
    n = th * tw
    local_var = s2 - s * s / n
    np.clip(local_var, 0.0, None, out=local_var)
    denom = np.sqrt(local_var * t_energy)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / denom
    r[~np.isfinite(r)] = 0.0
    return r.astype(np.float32)


def _subpixel_peak(corr: np.ndarray, i: int, j: int) -> tuple[float, float]:
    """Centroid of mass over the 3x3 neighborhood of a correlation peak."""
    i0, i1 = max(i - 1, 0), min(i + 2, corr.shape[0])
    j0, j1 = max(j - 1, 0), min(j + 2, corr.shape[1])
    patch = np.clip(corr[i0:i1, j0:j1], 0.0, None)
    total = patch.sum()
    if total <= 0:
        return float(j), float(i)
    ys, xs = np.mgrid[i0:i1, j0:j1]
    return float((xs * patch).sum() / total), float((ys * patch).sum() / total)


def iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    iw, ih = max(ix1 - ix0, 0.0), max(iy1 - iy0, 0.0)
    inter = iw * ih
    if inter == 0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def nms(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy by score: keep the best, suppress same-class overlaps."""
    ordered = sorted(
        detections, key=lambda d: (-d.score, d.centroid[1], d.centroid[0])
    )
    kept: list[Detection] = []
    for det in ordered:
        if all(
            det.cls is not k.cls or iou(det.bbox, k.bbox) <= iou_threshold for k in kept
        ):
            kept.append(det)
    return kept


# classes that cannot coexist at one location (mirrored glyph pairs)
_EXCLUSIVE = {DetClass.FIBER_TIP_LEFT: DetClass.FIBER_TIP_RIGHT,
              DetClass.FIBER_TIP_RIGHT: DetClass.FIBER_TIP_LEFT}


def _suppress_exclusive(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    """A location is one fiber tip or the other, never both: when mirrored
    tip classes overlap, the lower score loses."""
    ordered = sorted(
        detections, key=lambda d: (-d.score, d.centroid[1], d.centroid[0])
    )
    kept: list[Detection] = []
    for det in ordered:
        rival = _EXCLUSIVE.get(det.cls)
        if rival is not None and any(
            k.cls is rival and iou(det.bbox, k.bbox) > iou_threshold for k in kept
        ):
            continue
        kept.append(det)
    return kept


def detect(
    frame: Frame,
    templates: Templates,
    threshold: float = SCORE_THRESHOLD,
    iou_threshold: float = NMS_IOU,
    classes: list[DetClass] | None = None,
    roi: tuple[int, int, int, int] | None = None,
    max_instances: dict[DetClass, int] | None = None,
) -> list[Detection]:
    """All detections above threshold, NMS-applied, sorted by descending
    score (ties broken by centroid (y, x) for determinism).

    roi restricts the search to (x0, y0, x1, y1) in frame pixels; returned
    coordinates are always full-frame. max_instances caps detections per
    class (fiber tips default to one each).
    """
    if max_instances is None:
        max_instances = DEFAULT_MAX_INSTANCES
    image = frame.pixel_data
    ox = oy = 0
    if roi is not None:
        x0, y0, x1, y1 = (int(v) for v in roi)
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(x1, frame.width), min(y1, frame.height)
        image = image[y0:y1, x0:x1]
        ox, oy = x0, y0

    raw: list[Detection] = []
    for cls, variants in templates.items():
        if classes is not None and cls not in classes:
            continue
        for template in variants:
            th, tw = template.shape
            ax, ay = template.anchor
            if th > image.shape[0] or tw > image.shape[1]:
                if roi is None:
                    raise TemplateTooLarge(
                        f"{cls.value} template {template.shape} exceeds frame"
                    )
                continue
            corr = normxcorr(image, template.image).copy()
            for _ in range(MAX_PER_CLASS):
                i, j = np.unravel_index(int(np.argmax(corr)), corr.shape)
                score = float(corr[i, j])
                if score < threshold:
                    break
                sx, sy = _subpixel_peak(corr, int(i), int(j))
                cx = ox + sx + ax  # anchor point of the matched footprint
                cy = oy + sy + ay
                raw.append(
                    Detection(
                        cls=cls,
                        bbox=(cx - ax, cy - ay, cx + (tw - ax), cy + (th - ay)),
                        score=min(score, 1.0),
                        centroid=(cx, cy),
                    )
                )
                # suppress a template-sized neighborhood around this peak
                corr[
                    max(i - th // 2, 0) : i + th // 2 + 1,
                    max(j - tw // 2, 0) : j + tw // 2 + 1,
                ] = -1.0
    kept = _suppress_exclusive(nms(raw, iou_threshold), iou_threshold)
    counts: dict[DetClass, int] = {}
    out: list[Detection] = []
    for det in kept:
        counts[det.cls] = counts.get(det.cls, 0) + 1
        if counts[det.cls] <= max_instances.get(det.cls, MAX_PER_CLASS):
            out.append(det)
    return out
