#!/usr/bin/env python3
"""Independent reference for the saliency metrics.

Computes PR/F/MAE by brute-force per-threshold counting and the structure
measure as a straight port of the original reference code (sample moments,
centroid-split regions). Prints frozen values for the fixtures pinned in
tests/test_metrics.cpp.
"""
import numpy as np

EPS = 1e-12
BETA2 = 0.3


def quantize_u8(pred):
    return np.floor(255.0 * np.clip(pred, 0.0, 1.0) + 0.5).astype(np.int64)


def pr_single(pred, gt):
    """Per-image precision/recall at thresholds 1..255, brute force."""
    u8 = quantize_u8(pred)
    pos = int(gt.sum())
    prec = np.zeros(255)
    rec = np.zeros(255)
    for t in range(1, 256):
        b = u8 >= t
        tp = int((b & gt).sum())
        fp = int((b & ~gt).sum())
        prec[t - 1] = 1.0 if tp + fp == 0 else tp / (tp + fp)
        rec[t - 1] = 1.0 if pos == 0 else tp / pos
    return prec, rec


def pr_dataset(preds, gts):
    ps, rs = [], []
    for p, g in zip(preds, gts):
        prec, rec = pr_single(p, g)
        ps.append(prec)
        rs.append(rec)
    return np.mean(ps, axis=0), np.mean(rs, axis=0)


def f_measure(p, r, beta2=BETA2):
    den = beta2 * p + r
    return 0.0 if den == 0 else (1 + beta2) * p * r / den


def max_f(prec, rec):
    return max(f_measure(p, r) for p, r in zip(prec, rec))


def mae(pred, gt):
    return float(np.mean(np.abs(pred - gt.astype(float))))


def centroid(gt):
    total = gt.sum()
    col_sum = gt.sum(axis=0)
    row_sum = gt.sum(axis=1)
    sum_x = ((np.arange(gt.shape[1]) + 1) * col_sum).sum()
    sum_y = ((np.arange(gt.shape[0]) + 1) * row_sum).sum()
    x = int(np.floor(sum_x / total + 0.5)) - 1
    y = int(np.floor(sum_y / total + 0.5)) - 1
    return x, y


def ssim_block(sm, gt):
    n = sm.size
    if n == 0:
        return 0.0
    xm, ym = sm.mean(), gt.mean()
    if n > 1:
        sx2 = ((sm - xm) ** 2).sum() / (n - 1)
        sy2 = ((gt - ym) ** 2).sum() / (n - 1)
    else:
        sx2 = sy2 = 0.0
    sxy = ((sm - xm) * (gt - ym)).sum() / (n - 1 + EPS)
    alpha = 4 * xm * ym * sxy
    beta = (xm**2 + ym**2) * (sx2 + sy2)
    if alpha != 0:
        return alpha / (beta + EPS)
    return 1.0 if beta == 0 else 0.0


def s_region(pred, gt):
    x, y = centroid(gt)
    h, w = gt.shape
    cs, rs = x + 1, y + 1
    q = 0.0
    area = h * w
    for (r0, r1, c0, c1) in [(0, rs, 0, cs), (0, rs, cs, w), (rs, h, 0, cs), (rs, h, cs, w)]:
        weight = (r1 - r0) * (c1 - c0) / area
        if weight > 0:
            q += weight * ssim_block(pred[r0:r1, c0:c1], gt[r0:r1, c0:c1].astype(float))
    return q


def object_score(vals):
    x = vals.mean()
    if vals.size > 1:
        sigma = np.sqrt(((vals - x) ** 2).sum() / (vals.size - 1))
    else:
        sigma = 0.0
    return 2.0 * x / (x**2 + 1.0 + sigma + EPS)


def s_object(pred, gt):
    mu = gt.mean()
    o_fg = object_score(pred[gt])
    o_bg = object_score((1.0 - pred)[~gt])
    return mu * o_fg + (1 - mu) * o_bg


def s_measure(pred, gt, alpha=0.5):
    mu = gt.mean()
    if mu == 0:
        s = 1.0 - pred.mean()
    elif mu == 1:
        s = pred.mean()
    else:
        s = alpha * s_object(pred, gt) + (1 - alpha) * s_region(pred, gt)
    return float(np.clip(s, 0.0, 1.0))


def grid(n, f):
    return np.array([f(i) for i in range(n * n)]).reshape(n, n)


def main():
    np.set_printoptions(precision=12)

    # fixture P: 4x4 pair
    pred_p = grid(4, lambda i: ((i * 37 + 11) % 256) / 255.0)
    gt_p = grid(4, lambda i: ((i * 53 + 7) % 97) > 48)
    prec, rec = pr_single(pred_p, gt_p)
    print("== fixture P (4x4) ==")
    for t in (1, 64, 128, 200, 255):
        print(f"tau={t}: P={prec[t-1]:.12f} R={rec[t-1]:.12f}")
    print(f"max_f={max_f(prec, rec):.12f}")
    print(f"mae={mae(pred_p, gt_p):.12f}")

    # fixture S1/S2: 8x8 structure measure
    pred_s1 = grid(8, lambda i: ((i * 29 + 3) % 251) / 250.0)
    gt_s1 = grid(8, lambda i: ((i * 31 + 5) % 101) > 50)
    print("== fixture S1 (8x8) ==")
    print(f"s={s_measure(pred_s1, gt_s1):.12f}")

    pred_s2 = grid(8, lambda i: ((i * 17 + 9) % 256) / 255.0)
    gt_s2 = grid(8, lambda i: (2 <= i % 8 <= 5) and (2 <= i // 8 <= 5))
    print("== fixture S2 (8x8, centered square) ==")
    print(f"s={s_measure(pred_s2, gt_s2):.12f}")
    print(f"s1_mean_pred={pred_s1.mean():.12f}")

    # fixture E: 2-pair aggregate 6x6
    pred_e1 = grid(6, lambda i: ((i * 11 + 5) % 256) / 255.0)
    gt_e1 = grid(6, lambda i: (i % 6) < 3)
    pred_e2 = grid(6, lambda i: ((i * 7 + 13) % 256) / 255.0)
    gt_e2 = grid(6, lambda i: (i // 6) % 2 == 0)
    prec, rec = pr_dataset([pred_e1, pred_e2], [gt_e1, gt_e2])
    print("== fixture E (two 6x6 pairs) ==")
    print(f"max_f={max_f(prec, rec):.12f}")
    print(f"mae={(mae(pred_e1, gt_e1) + mae(pred_e2, gt_e2)) / 2:.12f}")
    print(f"s={(s_measure(pred_e1, gt_e1) + s_measure(pred_e2, gt_e2)) / 2:.12f}")
    print(f"P64={prec[63]:.12f} R64={rec[63]:.12f}")

    # spot values quoted in the docs
    print("== closed-form checks ==")
    print(f"f(0.8,0.5)={f_measure(0.8, 0.5):.12f}")


if __name__ == "__main__":
    main()
