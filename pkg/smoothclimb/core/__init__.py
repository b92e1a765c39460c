"""Numerical core: MDPs, hill-car, affine policies, continuations, gradients and optimizers."""
