"""Oracle source separation and BSS Eval v4 evaluation toolkit."""
