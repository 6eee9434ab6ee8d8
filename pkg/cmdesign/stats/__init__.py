"""
Discrete models over design graphs: stratified likelihood factorization,
parametrizations, simulation and maximum-likelihood fitting.
"""
