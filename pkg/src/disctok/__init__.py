"""disctok: discrete speech-token pipeline.

Quantizes feature-vector sequences with a k-means codebook, shortens the
token streams by de-duplication and unigram subword modeling, stores them
bit-packed, and scores token quality with purity/PNMI metrics.
"""

from ._kernels import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
