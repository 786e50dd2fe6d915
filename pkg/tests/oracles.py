"""Independent brute-force oracles: plain Python loops, no library reuse.

These deliberately re-derive every definition from scratch so the fast
implementations are checked against a second, independent path.
"""

import math


def cells(box):
    """Integer unit cells fully covered by an integer-corner box."""
    x0, y0, x1, y1 = (int(v) for v in box)
    return {(x, y) for x in range(x0, x1) for y in range(y0, y1)}


def brute_bbox_iou_cells(a, b):
    ca, cb = cells(a), cells(b)
    union = ca | cb
    if not union:
        return 0.0
    return len(ca & cb) / len(union)


def brute_mask_iou(a, b):
    inter = union = 0
    for row_a, row_b in zip(a, b):
        for va, vb in zip(row_a, row_b):
            if va and vb:
                inter += 1
            if va or vb:
                union += 1
    return inter / union if union else 0.0


def brute_dilate(bits, radius):
    h, w = len(bits), len(bits[0])
    out = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            hit = 0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and bits[yy][xx]:
                        hit = 1
            out[y][x] = hit
    return out

def brute_erode(bits, radius):
    h, w = len(bits), len(bits[0])
    out = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            keep = 1
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy, xx = y + dy, x + dx
                    if not (0 <= yy < h and 0 <= xx < w) or not bits[yy][xx]:
                        keep = 0
            out[y][x] = keep
    return out


def brute_boundary(bits):
    h, w = len(bits), len(bits[0])
    out = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            if not bits[y][x]:
                continue
            edge = y == 0 or x == 0 or y == h - 1 or x == w - 1
            if not edge:
                for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    if not bits[y + dy][x + dx]:
                        edge = True
            out[y][x] = 1 if edge else 0
    return out


def pixel_hsv(r, g, b):
    """8-bit-scale HSV: hue in [0, 256), s and v in [0, 255]."""
    v = max(r, g, b)
    mn = min(r, g, b)
    delta = v - mn
    s = 0.0 if v == 0 else delta * 255.0 / v
    if delta == 0:
        hp = 0.0
    elif v == r:
        hp = ((g - b) / delta) % 6.0
    elif v == g:
        hp = (b - r) / delta + 2.0
    else:
        hp = (r - g) / delta + 4.0
    return hp * 60.0 * (256.0 / 360.0), s, v


def brute_mean_hsv_diff(img_a, img_b):
    total = 0.0
    n = 0
    for row_a, row_b in zip(img_a, img_b):
        for (r1, g1, b1), (r2, g2, b2) in zip(row_a, row_b):
            h1, s1, v1 = pixel_hsv(float(r1), float(g1), float(b1))
            h2, s2, v2 = pixel_hsv(float(r2), float(g2), float(b2))
            dh = abs(h1 - h2)
            dh = min(dh, 256.0 - dh)
            total += (dh + abs(s1 - s2) + abs(v1 - v2)) / 3.0
            n += 1
    return total / n


def brute_nearest(point, candidates):
    """First candidate (in given order) at minimal squared distance."""
    best = None
    best_d = None
    for (cy, cx) in candidates:
        d = (cy - point[0]) ** 2 + (cx - point[1]) ** 2
        if best_d is None or d < best_d:
            best, best_d = (cy, cx), d
    return best


def brute_nearest_delta(pts, outer, inner, depth):
    out = []
    for p in pts:
        o = brute_nearest(p, outer)
        i = brute_nearest(p, inner)
        out.append(float(depth[o[0]][o[1]]) - float(depth[i[0]][i[1]]))
    return out


# -- metric oracles -----------------------------------------------------

def brute_pck(pred, gt, area, alpha, conf_floor=0.3):
    """pred/gt: lists of (x, y, conf). Returns (correct, valid)."""
    thresh = alpha * math.sqrt(area)
    correct = valid = 0
    for (px, py, _), (gx, gy, gc) in zip(pred, gt):
        if gc < conf_floor:
            continue
        valid += 1
        if math.dist((px, py), (gx, gy)) <= thresh:
            correct += 1
    return correct, valid


def brute_mpjve(pred_seq, gt_seq, norm):
    """Sequences of J-joint (x, y) lists; mean over joints and steps."""
    total = 0.0
    n = 0
    for t in range(len(gt_seq) - 1):
        for j in range(len(gt_seq[0])):
            vg = ((gt_seq[t + 1][j][0] - gt_seq[t][j][0]) / norm,
                  (gt_seq[t + 1][j][1] - gt_seq[t][j][1]) / norm)
            vp = ((pred_seq[t + 1][j][0] - pred_seq[t][j][0]) / norm,
                  (pred_seq[t + 1][j][1] - pred_seq[t][j][1]) / norm)
            total += math.dist(vg, vp)
            n += 1
    return total / n


def brute_keypoint_mse(pred, gt):
    return sum((px - gx) ** 2 + (py - gy) ** 2 for (px, py), (gx, gy) in zip(pred, gt))


def brute_roughness(seq):
    first = 0.0
    for t in range(len(seq) - 1):
        first += sum((a - b) ** 2 for a, b in zip(seq[t + 1], seq[t]))
    second = 0.0
    for t in range(len(seq) - 2):
        second += sum(
            ((c - b) - (b - a)) ** 2
            for a, b, c in zip(seq[t], seq[t + 1], seq[t + 2])
        )
    return first + second


def brute_keypoint_transfer(src_kps, tgt_kps, src_verts, tgt_verts, tgt_area, alpha,
                            conf_floor=0.3):
    """Nearest-vertex transfer then PCK against the target gt. -> (correct, valid)"""
    thresh = alpha * math.sqrt(tgt_area)
    correct = valid = 0
    for (sx, sy, sc), (gx, gy, gc) in zip(src_kps, tgt_kps):
        if sc < conf_floor or gc < conf_floor:
            continue
        valid += 1
        best, best_d = None, None
        for i, (vx, vy) in enumerate(src_verts):
            d = (vx - sx) ** 2 + (vy - sy) ** 2
            if best_d is None or d < best_d:
                best, best_d = i, d
        tx, ty = tgt_verts[best]
        if math.dist((tx, ty), (gx, gy)) <= thresh:
            correct += 1
    return correct, valid
