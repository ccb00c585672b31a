# Copyright 2026 The resdiff Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes the PNG reader fixtures under tests/fixtures with Pillow."""
import pathlib

import numpy as np
from PIL import Image

out = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
out.mkdir(exist_ok=True)

gray8 = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
Image.fromarray(gray8, mode="L").save(out / "gray8.png")

gray16 = (np.arange(12, dtype=np.uint16).reshape(3, 4) * 5000).astype(np.uint16)
Image.fromarray(gray16).save(out / "gray16.png")

# Equal R, G, B so any standard gray conversion reproduces gray8.
rgb = np.stack([gray8] * 3, axis=-1)
Image.fromarray(rgb, mode="RGB").save(out / "rgb8.png")
rgba = np.concatenate([rgb, np.full((3, 4, 1), 128, np.uint8)], axis=-1)
Image.fromarray(rgba, mode="RGBA").save(out / "rgba8.png")

labels = np.zeros((6, 6), np.uint8)
labels[1:3, 1:3] = 7
labels[4:6, 3:6] = 3
Image.fromarray(labels, mode="L").save(out / "labels8.png")
