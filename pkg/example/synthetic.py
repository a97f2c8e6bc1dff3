# SPDX-License-Identifier: LGPL-3.0-only

import logging

import numpy as np

from metaemb import (
    METHODS,
    EmbeddingTable,
    EvalReport,
    LossKind,
    MetaMethod,
    SimilarityDataset,
    TrainConfig,
    align,
    l2_normalize,
)

logging.basicConfig(level = logging.INFO, format = "[%(asctime)s] %(levelname)s - %(message)s")

# Real source embeddings are large downloads, so this walkthrough builds its own.
# Every word has a hidden 10-d "meaning"; each source sees it through a different
# random linear map plus noise. A good meta-embedding should recover the meaning
# better than any single noisy source does.

rng = np.random.default_rng(7)
words = [f"w{i:03d}" for i in range(200)]
latent = rng.normal(size = (len(words), 10))

sources = []
for name in ("alpha", "beta", "gamma"):
    view = rng.normal(scale = 1 / np.sqrt(10), size = (10, 20))
    matrix = latent @ view + rng.normal(size = (len(words), 20))
    sources.append(EmbeddingTable(name, words, matrix))

# Sources are intersected on their shared vocabulary and every row is scaled to
# unit length. All methods expect a normalized set.

aligned = l2_normalize(align(sources))

# Human judgements are simulated with cosines between the hidden meanings.

unit = latent / np.linalg.norm(latent, axis = 1, keepdims = True)
pairs = []
for _ in range(300):
    a, b = rng.choice(len(words), size = 2, replace = False)
    pairs.append((words[a], words[b], float(unit[a] @ unit[b])))
unique = list({ frozenset(pair[:2]): pair for pair in pairs }.values())
dataset = SimilarityDataset("latent", tuple(unique))

# Every method lives on the METHODS registry. A post-build hook is a handy place
# to look at what was built; here it reports the final training loss.


@METHODS.build_hook(post = True)
def report_loss(spec, model) -> None:  # noqa: ANN001
    if model.trace:
        logging.info("%s finished at loss %.4f", model.label, model.trace[-1])


config = TrainConfig(epochs = 50, seed = 0)
report = EvalReport()
for table in aligned.sources:
    report.score(table.name, table, dataset)

for method in (MetaMethod.CONC, MetaMethod.AV):
    report.score(method.value, METHODS.build(method, aligned), dataset, aligned)

report.score("svd", METHODS.build(MetaMethod.SVD, aligned, rank = 20), dataset, aligned)

for loss in (LossKind.MSE, LossKind.SCP):
    model = METHODS.build(MetaMethod.CAEME, aligned, loss = loss, config = config)
    report.score(model.label, model, dataset, aligned)

# A target autoencoder predicts one source from the others. Appending the target
# vector to its hidden layer needs no retraining.

tae = METHODS.build(MetaMethod.TAE, aligned, loss = LossKind.MSE, config = config, target_index = 0)
report.score(tae.label, tae, dataset, aligned)
report.score(tae.with_target_appended().label, tae.with_target_appended(), dataset, aligned)

METHODS.remove_hook(report_loss)
print(report.render())
