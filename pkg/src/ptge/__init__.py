"""ptge: pseudo-triplet generation engine for few-shot composed image retrieval.

Data-engineering pipeline around an externally trained retrieval model:
build pseudo training triplets from unlabeled images (patch masking +
captioning), score unlabeled pairs by composed-query/target distance,
actively select annotation candidates, evaluate retrieval with Recall@k,
and run the annotation loop over HTTP.
"""

__version__ = "0.1.0"


class PtgeError(Exception):
    """Base class for all pipeline errors."""
