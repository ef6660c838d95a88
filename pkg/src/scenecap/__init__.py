"""scenecap: localize and describe every object in a 3D point-cloud scene.

A single transformer encoder-decoder consumes a raw point cloud and emits a
set of (bounding box, sentence) pairs in parallel, trained end to end as a
set-prediction problem. The package covers the full loop: geometry kernels,
the differentiable model, set matching and losses, caption metrics, a
synthetic-scene corpus, and a train/eval/plot harness.
"""

__version__ = "0.1.0"
