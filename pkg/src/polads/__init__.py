"""Political-ad classification from ad text and advertiser targeting data.

The package covers the full pipeline: archive ingestion and labeling,
targeting and text feature encoders, a Naive Bayes baseline, a
gradient-boosted tree classifier with inverse-frequency class weights,
advertiser-disjoint evaluation with a paired bootstrap test, and exact
SHAP feature attributions. The `polads` command line drives it end to end.
"""

__version__ = "0.1.0"

from .ingest import AdRecord, Dataset, Label, derive_label, load_corpus, parse_record
from .sparse import SparseVector

__all__ = [
    "AdRecord", "Dataset", "Label", "SparseVector",
    "derive_label", "load_corpus", "parse_record",
    "__version__",
]
