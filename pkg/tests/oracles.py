"""Slow, obviously-correct reference computations.

Nothing here calls into the code paths under test except for plain data
types, so a bug in the fast path cannot hide in its own oracle.
"""

from __future__ import annotations

import math


def box_iou(a, b):
    """IoU of two (x0, y0, x1, y1) tuples."""
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    inter = max(0.0, ix1 - ix0) * max(0.0, iy1 - iy0)
    ua = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / ua if ua > 0 else 0.0


def greedy_tp_flags(dets, gts, tau):
    """dets: list of (box, score). Returns is_tp per det, in the dets' own order."""
    order = sorted(range(len(dets)), key=lambda i: -dets[i][1])
    taken = [False] * len(gts)
    flags = [False] * len(dets)
    for i in order:
        best, best_j = -1.0, -1
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            v = box_iou(dets[i][0], g)
            if v > best:
                best, best_j = v, j
        if best_j >= 0 and best >= tau:
            taken[best_j] = True
            flags[i] = True
    return flags


def ap_threshold_sweep(dets_by_image, gts_by_image, tau):
    """AP by sweeping every distinct score threshold and re-matching from scratch.

    dets_by_image: {key: [(box, score), ...]}; gts_by_image: {key: [box, ...]}.
    """
    n_gt = sum(len(v) for v in gts_by_image.values())
    scores = sorted({s for v in dets_by_image.values() for _, s in v}, reverse=True)
    points = []
    for t in scores:
        tp = fp = 0
        for key, dets in dets_by_image.items():
            kept = [d for d in dets if d[1] >= t]
            flags = greedy_tp_flags(kept, gts_by_image.get(key, []), tau)
            tp += sum(flags)
            fp += len(flags) - sum(flags)
        points.append((tp / n_gt, tp / (tp + fp)))
    recalls = sorted({r for r, _ in points})
    area, prev = 0.0, 0.0
    for r in recalls:
        p_interp = max(p for rr, p in points if rr >= r)
        area += (r - prev) * p_interp
        prev = r
    return area


def ciou_terms(pred, gt):
    """1 - CIoU evaluated one named quantity at a time."""
    px0, py0, px1, py1 = pred
    gx0, gy0, gx1, gy1 = gt
    overlap = box_iou(pred, gt)
    pcx, pcy = (px0 + px1) / 2, (py0 + py1) / 2
    gcx, gcy = (gx0 + gx1) / 2, (gy0 + gy1) / 2
    rho_sq = (pcx - gcx) ** 2 + (pcy - gcy) ** 2
    enclose_w = max(px1, gx1) - min(px0, gx0)
    enclose_h = max(py1, gy1) - min(py0, gy0)
    c_sq = enclose_w ** 2 + enclose_h ** 2
    pw, ph = px1 - px0, py1 - py0
    gw, gh = gx1 - gx0, gy1 - gy0
    v = 4 / math.pi ** 2 * (math.atan(gw / gh) - math.atan(pw / ph)) ** 2
    alpha = 0.0 if (1 - overlap) + v == 0 else v / ((1 - overlap) + v)
    return 1 - (overlap - rho_sq / c_sq - alpha * v)


def laplacian_responses(rows):
    """4-neighbour Laplacian over interior pixels of a list-of-lists image."""
    h, w = len(rows), len(rows[0])
    out = []
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            out.append(rows[y - 1][x] + rows[y + 1][x] + rows[y][x - 1] + rows[y][x + 1]
                       - 4 * rows[y][x])
    return out


def population_variance(values):
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values) / len(values)


def tally_confusion(pred_rows, gt_rows, k):
    cm = [[0] * k for _ in range(k)]
    for pr, gr in zip(pred_rows, gt_rows):
        for p, g in zip(pr, gr):
            cm[g][p] += 1
    return cm
