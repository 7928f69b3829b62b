# The Min-Max layer
#
# Rescales each feature map into a fixed target range using the batch
# extrema while training and a moving mean of those extrema afterwards.

import numpy as np

from minmaxhe import MinMaxState, minmax_forward_infer, minmax_forward_train

rng = np.random.default_rng(0)
state = MinMaxState(-3.0, 3.0, momentum=0.9)

# Two channels with very different scales
batch = rng.normal(size=(8, 2, 4, 4)) * np.array([1.0, 50.0])[None, :, None, None]

out, state = minmax_forward_train(state, batch)
print("train output range per channel:",
      out.min(axis=(0, 2, 3)), out.max(axis=(0, 2, 3)))
print("running min/max after first batch:", state.running_min, state.running_max)

# A few more batches to let the running stats settle
for _ in range(20):
    batch = rng.normal(size=(8, 2, 4, 4)) * np.array([1.0, 50.0])[None, :, None, None]
    _, state = minmax_forward_train(state, batch)

# At inference the map is a fixed affine function and may leave the target range
test = rng.normal(size=(1, 2, 4, 4)) * np.array([1.0, 50.0])[None, :, None, None]
y = minmax_forward_infer(state, test)
print("inference output range:", y.min(), y.max())
