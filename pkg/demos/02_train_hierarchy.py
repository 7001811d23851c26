"""
Training the three-level hierarchy
==================================

Train one module per level on the synthetic orientation/width/stroke
taxonomy, then read the three decisions for a few held-out images.
Takes about a minute on one core.
"""

import numpy as np

from rsnn.harness.evaluate import evaluate
from rsnn.harness.synth import taxonomy_corpus
from rsnn.hierarchy import (LEVELS, HierarchyModel, build_taxonomy, consistency_report,
                            default_level_config, infer_hierarchy, train_level)

data = taxonomy_corpus(per_class=10, side=32, seed=0)
taxonomy = build_taxonomy([labels for _, labels in data])
print("taxonomy:", taxonomy.L, "superordinate,", taxonomy.I, "basic,", taxonomy.H, "subordinate")

# half of every leaf for training, the rest held out
leaf = np.array([labels[2] for _, labels in data])
first_half = np.concatenate([np.flatnonzero(leaf == x)[:5] for x in sorted(set(leaf))])
train = [data[i] for i in sorted(first_half)]
test = [data[i] for i in range(len(data)) if i not in set(first_half)]

modules = {}
for i, level in enumerate(LEVELS):
    cfg = default_level_config("synthetic", level)
    pairs = [(img, labels[i]) for img, labels in train]
    modules[level] = train_level(level, taxonomy, pairs, cfg, seed=0)
    trace = modules[level].trace
    late = trace[-len(pairs):]
    fit = np.mean([r.decided == r.true_class for r in late])
    print(f"{level:>5}: Gabor window {cfg.gabor_window}, {cfg.n_lattices} lattices, "
          f"last-epoch fit {fit:.2f}")

for i, level in enumerate(LEVELS):
    report = evaluate(modules[level], [(img, labels[i]) for img, labels in test])
    print(f"{level:>5} test accuracy {report.accuracy:.3f} (silent {report.silent_rate:.3f})")

model = HierarchyModel(taxonomy, modules)
consistent = 0
for img, labels in test:
    decisions = infer_hierarchy(img, model)
    consistent += consistency_report(decisions, model)
print(f"consistent label paths: {consistent}/{len(test)}")

img, labels = test[0]
got = [modules[lvl].label_of(d) for lvl, d in zip(LEVELS, infer_hierarchy(img, model))]
print("truth:  ", " / ".join(labels))
print("decided:", " / ".join(str(g) for g in got))
