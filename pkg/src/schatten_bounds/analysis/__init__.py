"""
Numerical engine.

Modules:
- spectral: singular values, Schatten powers and mixed norms
- model: the simplified transformer and its forward pass
- bounds: bound configuration, radius allocation and gap bounds
- entropy: covering number estimates and scale allocation
- posthoc: Schatten index selection and the post hoc bound
- baselines: spectral-norm baselines and regime tables
- bertproxy: complexity proxies for BERT-style checkpoints
"""
