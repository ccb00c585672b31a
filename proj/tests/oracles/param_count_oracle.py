# Copyright 2026 The resdiff Authors
# SPDX-License-Identifier: Apache-2.0
"""Closed-form parameter count of the denoiser UNet, used to freeze goldens."""


def conv(cin, cout, k):
    return cout * cin * k * k + cout


def linear(cin, cout):
    return cin * cout + cout


def norm(c):
    return 2 * c


def resblock(cin, cout, d):
    n = norm(cin) + conv(cin, cout, 3) + linear(d, 2 * cout) + norm(cout) + conv(cout, cout, 3)
    if cin != cout:
        n += conv(cin, cout, 1)
    return n


def count(out_ch, cond_ch, base, levels, blocks, d, attention):
    w = [base << i for i in range(levels)]
    n = 2 * linear(d, d) + conv(out_ch + cond_ch, w[0], 3)
    prev = w[0]
    for lvl in range(levels):
        for _ in range(blocks):
            n += resblock(prev, w[lvl], d)
            prev = w[lvl]
        if lvl + 1 < levels:
            n += conv(w[lvl], w[lvl], 3)
    wb = w[-1]
    n += 2 * resblock(wb, wb, d)
    if attention:
        n += norm(wb) + conv(wb, 3 * wb, 1) + conv(wb, wb, 1)
    for lvl in reversed(range(levels)):
        for b in range(blocks):
            n += resblock(2 * w[lvl] if b == 0 else w[lvl], w[lvl], d)
        if lvl > 0:
            n += conv(w[lvl], w[lvl - 1], 3)
    n += norm(w[0]) + conv(w[0], out_ch, 3)
    return n


if __name__ == "__main__":
    for args in [(7, 1, 32, 3, 2, 128, True), (7, 1, 16, 3, 2, 64, True), (7, 1, 4, 2, 1, 8, False),
                 (7, 7, 16, 3, 2, 64, True), (3, 2, 8, 1, 1, 16, True)]:
        print(args, count(*args))
