"""Model-side adapter for the nerfuse toolkit.

Bridges real transformer models to the toolkit's file and process
protocols: contextual entity-embedding extraction, NER fine-tune/predict
for cross-dataset similarity and pseudo-labels, and the grid-search
evaluator hook.  Any program honoring the same file formats can replace
this package.
"""

from .config import AdapterConfig

__version__ = "0.1.0"
__all__ = ["AdapterConfig"]
