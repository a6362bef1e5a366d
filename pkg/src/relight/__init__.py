"""Scene relighting toolkit built around intrinsic image decomposition.

Subpackages cover the full pipeline: procedural dataset synthesis with exact
reflectance/shading ground truth, dataset persistence and pair sampling, the
two-stage relighting network, its supervised and unsupervised loss suite,
training, evaluation metrics, a CLI, and an HTTP inference service.
"""

__version__ = "0.1.0"
