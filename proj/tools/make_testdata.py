#!/usr/bin/env python3
# Copyright 2026 The rimseg Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds the desk-scale test corpus under tests/data.

natural/   five 128x128 crops of the sample photographs bundled with
           scikit-image (public domain / CC0).
mosaic/    ten 128x128 texture mosaics with exact ground truth. Regions are
           warped Voronoi cells filled with tinted scikit-image textures or
           smooth color fields; gt/ holds 16-bit label PNGs with the same stem.

Usage: python3 tools/make_testdata.py [out_dir]
"""
import os
import sys

import numpy as np
from PIL import Image
from scipy import ndimage
from skimage import data

SIZE = 128


def center_square(img):
    h, w = img.shape[:2]
    s = min(h, w)
    y0, x0 = (h - s) // 2, (w - s) // 2
    return img[y0:y0 + s, x0:x0 + s]


def downscale(img, size=SIZE):
    return np.asarray(Image.fromarray(img).resize((size, size), Image.BOX))


def natural(out):
    os.makedirs(out, exist_ok=True)
    for name in ["astronaut", "chelsea", "coffee", "rocket", "motorcycle_left"]:
        if name == "motorcycle_left":
            img = data.stereo_motorcycle()[0]
        else:
            img = getattr(data, name)()
        img = downscale(center_square(img[..., :3]))
        Image.fromarray(img).save(os.path.join(out, name + ".png"))


def smooth_field(rng, shape, scale):
    f = rng.standard_normal(shape)
    f = ndimage.gaussian_filter(f, scale)
    return f / (f.std() + 1e-12)


def texture_pool(rng):
    pool = []
    for name in ["brick", "grass", "gravel"]:
        t = getattr(data, name)().astype(np.float64) / 255.0
        pool.append(t)
    return pool


def fill_region(rng, pool):
    kind = rng.integers(0, 2)
    base = rng.uniform(0.1, 0.9, size=3)
    if kind == 0:
        tex = pool[rng.integers(0, len(pool))]
        y = rng.integers(0, tex.shape[0] - SIZE)
        x = rng.integers(0, tex.shape[1] - SIZE)
        patch = tex[y:y + SIZE, x:x + SIZE]
        patch = (patch - patch.mean()) * rng.uniform(0.5, 1.0)
        return np.clip(base[None, None, :] + patch[..., None], 0, 1)
    amp = rng.uniform(0.03, 0.12)
    field = np.stack([smooth_field(rng, (SIZE, SIZE), rng.uniform(2, 6)) for _ in range(3)], -1)
    return np.clip(base[None, None, :] + amp * field, 0, 1)


def mosaic(out, count=10, seed=2026):
    rng = np.random.default_rng(seed)
    pool = texture_pool(rng)
    img_dir = os.path.join(out, "images")
    gt_dir = os.path.join(out, "gt")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(gt_dir, exist_ok=True)
    yy, xx = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
    for k in range(count):
        n_regions = int(rng.integers(4, 9))
        seeds = rng.uniform(0, SIZE, size=(n_regions, 2))
        wy = yy + 6.0 * smooth_field(rng, (SIZE, SIZE), 10)
        wx = xx + 6.0 * smooth_field(rng, (SIZE, SIZE), 10)
        d = (wy[None] - seeds[:, 0, None, None]) ** 2 + (wx[None] - seeds[:, 1, None, None]) ** 2
        labels = np.argmin(d, axis=0)
        img = np.zeros((SIZE, SIZE, 3))
        for r in range(n_regions):
            img[labels == r] = fill_region(rng, pool)[labels == r]
        img = ndimage.gaussian_filter(img, sigma=(0.7, 0.7, 0))
        shade = 0.08 * (xx / SIZE - 0.5) + 0.05 * (yy / SIZE - 0.5)
        img = img + shade[..., None] + rng.normal(0, 0.01, img.shape)
        img = (np.clip(img, 0, 1) * 255 + 0.5).astype(np.uint8)
        stem = "mosaic%02d" % k
        Image.fromarray(img).save(os.path.join(img_dir, stem + ".png"))
        Image.fromarray(labels.astype(np.uint16)).save(os.path.join(gt_dir, stem + ".png"))


def main():
    root = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "tests", "data")
    natural(os.path.join(root, "natural"))
    mosaic(os.path.join(root, "mosaic"))


if __name__ == "__main__":
    main()
