# Copyright 2026 The PotQ Authors. All Rights Reserved.
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
#

"""Regenerates data/digits-*.idx from the scikit-learn copy of UCI optdigits."""

import struct

import numpy as np
from sklearn.datasets import load_digits


def write_images(path, a):
  with open(path, 'wb') as f:
    f.write(struct.pack('>I', 0x0803))
    f.write(struct.pack('>III', a.shape[0], 8, 8))
    f.write(a.tobytes())


def write_labels(path, a):
  with open(path, 'wb') as f:
    f.write(struct.pack('>I', 0x0801))
    f.write(struct.pack('>I', a.shape[0]))
    f.write(a.tobytes())


def main():
  d = load_digits()
  images = np.rint(d.images * 255.0 / 16.0).astype(np.uint8)
  labels = d.target.astype(np.uint8)
  # 80/20 split per class.
  rng = np.random.default_rng(20220117)
  train_idx, val_idx = [], []
  for c in range(10):
    idx = np.flatnonzero(labels == c)
    rng.shuffle(idx)
    n_val = int(round(len(idx) * 0.2))
    val_idx += list(idx[:n_val])
    train_idx += list(idx[n_val:])
  train_idx = np.array(sorted(train_idx))
  val_idx = np.array(sorted(val_idx))
  write_images('data/digits-train-images.idx3-ubyte', images[train_idx])
  write_labels('data/digits-train-labels.idx1-ubyte', labels[train_idx])
  write_images('data/digits-val-images.idx3-ubyte', images[val_idx])
  write_labels('data/digits-val-labels.idx1-ubyte', labels[val_idx])
  print(len(train_idx), len(val_idx))


if __name__ == '__main__':
  main()
