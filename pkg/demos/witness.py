"""Witness models: parameters under which every optimal predictor introduces variation."""

from itv_audit.experiments import hiring_graph, music_graph, witness_itv_range, witness_scm
from itv_audit.modelfile import dumps_model

for name, graph in (("hiring", hiring_graph()), ("music", music_graph())):
    model = witness_scm(graph)
    lo, hi, n = witness_itv_range(model)
    print(f"{name}: {n} optimal policies, ITV in [{lo:.4f}, {hi:.4f}]")

print(dumps_model(witness_scm(hiring_graph())))
