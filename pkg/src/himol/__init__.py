"""himol: few-shot molecular generation by hierarchical prompt-token
inversion on a small frozen SMILES language model, with sampling by
embedding interpolation, SMILES repair, and a generation-metrics suite."""

__version__ = "0.1.0"
