"""nermine: mine NER training data for low-resource languages from parallel
corpora by aligning words and projecting entity annotations."""

__version__ = "0.1.0"
