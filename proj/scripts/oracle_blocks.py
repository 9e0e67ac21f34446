#!/usr/bin/env python3
"""Reference values for the block micro-case tests.

Builds each block out of torch primitives in float64 with deterministic
hand-set weights (arithmetic sequences), runs the forward pass in eval mode,
and prints the outputs as C++ initializer lists. The C++ tests freeze these
numbers; regenerate only if the micro-case definitions change.
"""
import torch
import torch.nn.functional as F

torch.set_default_dtype(torch.float64)


def seq(shape, start, step):
    n = 1
    for d in shape:
        n *= d
    return (start + step * torch.arange(n, dtype=torch.float64)).reshape(shape)


def bn_eval(x, gamma, beta, rm, rv, eps=1e-5):
    g = torch.tensor(gamma)
    b = torch.tensor(beta)
    m = torch.tensor(rm)
    v = torch.tensor(rv)
    return F.batch_norm(x, m, v, g, b, training=False, eps=eps)


def up(x, size):
    return F.interpolate(x, size=size, mode="bilinear", align_corners=False)


def dump(name, t):
    flat = t.flatten().tolist()
    vals = ", ".join(f"{v:.15g}" for v in flat)
    print(f"{name} [{list(t.shape)}] = {{{vals}}}")


def sr_micro():
    x = seq((1, 1, 2, 2), 0.5, 0.25)
    w6 = seq((1, 1, 3, 3), 0.05, 0.02)
    f = bn_eval(F.conv2d(x, w6, padding=1), [1.2], [0.1], [0.0], [0.8]).relu()
    wW = seq((1, 1, 3, 3), 0.1, 0.02)
    wB = seq((1, 1, 3, 3), -0.05, 0.03)
    W = F.conv2d(f, wW, bias=torch.tensor([0.05]), padding=1)
    b = F.conv2d(f, wB, bias=torch.tensor([-0.02]), padding=1)
    out = (W * f + b).relu()
    dump("sr", out)


def ha_micro():
    x = seq((1, 2, 2, 2), 0.1, 0.1)
    wc = seq((2, 2, 3, 3), -0.1, 0.012)
    f = bn_eval(F.conv2d(x, wc, padding=1), [1.1, 0.9], [0.02, -0.03], [0.1, -0.2], [0.9, 1.1]).relu()
    wW = seq((2, 2, 3, 3), 0.08, -0.004)
    wB = seq((2, 2, 3, 3), -0.06, 0.005)
    W = F.conv2d(f, wW, bias=torch.tensor([0.01, -0.01]), padding=1)
    b = F.conv2d(f, wB, bias=torch.tensor([0.03, 0.0]), padding=1)
    f1 = (W * f + b).relu()
    g = f.mean(dim=(2, 3))
    h = F.linear(g, torch.tensor([[0.4, -0.3]]), torch.tensor([0.05])).relu()
    y = torch.sigmoid(F.linear(h, torch.tensor([[0.7], [-0.5]]), torch.tensor([0.1, -0.2])))
    out = f1 * y[:, :, None, None]
    dump("ha", out)


def gcf_micro():
    x = torch.tensor([0.6, -0.4]).reshape(1, 2, 1, 1)
    g = x.mean(dim=(2, 3))
    h = F.linear(g, torch.tensor([[0.5, 0.25]]), torch.tensor([-0.1])).relu()
    y = torch.sigmoid(F.linear(h, torch.tensor([[0.8], [-0.6]]), torch.tensor([0.2, 0.1])))
    w10 = seq((2, 2, 3, 3), 0.05, 0.01)
    proj = bn_eval(F.conv2d(x, w10, padding=1), [1.0, 1.3], [0.0, 0.05], [-0.2, -0.05], [1.2, 0.7]).relu()
    out = proj * y[:, :, None, None]
    dump("gcf", out)


def fia_micro():
    f_l = seq((1, 1, 4, 4), 0.05, 0.05)
    f_h = torch.tensor([0.3, -0.2, 0.5, 0.1]).reshape(1, 1, 2, 2)
    f_g = torch.tensor([0.7]).reshape(1, 1, 1, 1)
    w1 = torch.tensor([[[[0.9]]]])
    fl = bn_eval(F.conv2d(f_l, w1), [1.05], [0.02], [0.1], [0.95]).relu()
    w2 = seq((1, 1, 3, 3), 0.1, 0.02)
    w_h = up(F.conv2d(f_h, w2, bias=torch.tensor([0.02]), padding=1), (4, 4))
    f_hl = (w_h * fl).relu()
    w3 = seq((1, 1, 3, 3), 0.12, -0.03)
    w_l = F.conv2d(fl, w3, bias=torch.tensor([-0.01]), padding=1)
    f_lh = (w_l * up(f_h, (4, 4))).relu()
    w4 = seq((1, 1, 3, 3), 0.2, -0.05)
    w_g = up(F.conv2d(f_g, w4, bias=torch.tensor([0.03]), padding=1), (4, 4))
    f_gl = (w_g * fl).relu()
    cat = torch.cat([f_hl, f_lh, f_gl], dim=1)
    w5 = seq((1, 3, 3, 3), 0.02, 0.012)
    out = bn_eval(F.conv2d(cat, w5, padding=1), [1.1], [0.05], [-0.1], [1.05]).relu()
    dump("fia", out)


if __name__ == "__main__":
    sr_micro()
    ha_micro()
    gcf_micro()
    fia_micro()
