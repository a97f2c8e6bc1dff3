# SPDX-License-Identifier: LGPL-3.0-only

import json
import logging

import numpy as np
import pytest

from metaemb import (
    AlignedEmbeddingSet,
    ArtifactError,
    ContractError,
    CoverageError,
    DuplicatePairError,
    EmbeddingTable,
    EmptyInputError,
    EvalEntry,
    EvalReport,
    FormatError,
    LossKind,
    MetaMethod,
    ParseError,
    SimilarityDataset,
    TrainConfig,
    UndefinedCorrelationError,
    UndefinedCosineError,
    align,
    cosine,
    evaluate,
    l2_normalize,
    load_dataset,
    spearman,
    train_ae,
)
from metaemb.reference import load_reference


def brute_force_spearman(xs, ys):
    def ranks(values):
        ordered = sorted(values)
        result = []
        for value in values:
            positions = [i + 1 for i, other in enumerate(ordered) if other == value]
            result.append(sum(positions) / len(positions))
        return result

    rx, ry = ranks(list(xs)), ranks(list(ys))
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    var_x = sum((a - mx) ** 2 for a in rx)
    var_y = sum((b - my) ** 2 for b in ry)
    return cov / (var_x * var_y) ** 0.5


def fan_table(count):
    """Unit vectors at increasing angles from ``w0``."""
    angles = np.linspace(0.0, np.pi * 0.9, count)
    words = [f"w{i}" for i in range(count)]
    return EmbeddingTable("fan", words, np.stack([np.cos(angles), np.sin(angles)], axis = 1))


def fan_dataset(count, *, reverse = False):
    scores = np.linspace(10.0, 1.0, count - 1)
    if reverse:
        scores = scores[::-1]
    pairs = tuple(("w0", f"w{i}", float(score)) for i, score in zip(range(1, count), scores))
    return SimilarityDataset("fan", pairs)


class TestLoadDataset:
    def test_plain(self, write_text):
        path = write_text("rg.tsv", "cat\tdog\t7.5\ncar\tbus\t6\nsun\tmoon\t5.25\n")
        dataset = load_dataset(path)
        assert dataset.name == "rg"
        assert dataset.pairs == (("cat", "dog", 7.5), ("car", "bus", 6.0), ("sun", "moon", 5.25))
        assert dataset.words == { "cat", "dog", "car", "bus", "sun", "moon" }

    def test_header_skipped(self, write_text):
        dataset = load_dataset(write_text("d.tsv", "word1\tword2\tscore\na\tb\t1\nc\td\t2\n"))
        assert len(dataset) == 2

    def test_header_only_on_first_line(self, write_text):
        with pytest.raises(ParseError, match = "line 2"):
            load_dataset(write_text("d.tsv", "a\tb\t1\nc\td\tscore\n"))

    def test_comma_delimited(self, write_text):
        dataset = load_dataset(write_text("d.csv", "a,b,0.5\nc,d,1.5\n"), delimiter = ",")
        assert dataset.pairs[1] == ("c", "d", 1.5)

    def test_whitespace_delimited(self, write_text):
        dataset = load_dataset(write_text("d.txt", "a  b 1\nc\td 2\n"), "named", delimiter = None)
        assert dataset.name == "named"
        assert len(dataset) == 2

    def test_score_not_a_number(self, write_text):
        with pytest.raises(ParseError, match = "line 2") as info:
            load_dataset(write_text("d.txt", "a b 1\ncat dog x\n"), delimiter = None)
        assert info.value.line == 2

    def test_wrong_field_count(self, write_text):
        with pytest.raises(FormatError, match = "line 1"):
            load_dataset(write_text("d.tsv", "a\tb\n"))

    def test_duplicate_unordered_pair(self, write_text):
        with pytest.raises(DuplicatePairError):
            load_dataset(write_text("d.tsv", "a\tb\t1\nb\ta\t2\n"))

    def test_empty(self, write_text):
        with pytest.raises(EmptyInputError):
            load_dataset(write_text("d.tsv", "\n"))

    def test_header_alone_is_empty(self, write_text):
        with pytest.raises(EmptyInputError):
            load_dataset(write_text("d.tsv", "w1\tw2\tscore\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactError):
            load_dataset(tmp_path / "none.tsv")

    def test_non_finite_score(self):
        with pytest.raises(ContractError):
            SimilarityDataset("d", (("a", "b", float("nan")),))


class TestCosine:
    def test_examples(self):
        v = np.array([0.3, -2.0, 1.0])
        assert cosine(v, v) == pytest.approx(1.0, abs = 1e-15)
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0
        assert cosine([1.0, 1.0], [1.0, 0.0]) == pytest.approx(1 / np.sqrt(2), abs = 1e-12)

    def test_symmetric_and_scale_invariant(self):
        rng = np.random.default_rng(0)
        u, v = rng.normal(size = (2, 6))
        assert cosine(u, v) == pytest.approx(cosine(v, u), abs = 1e-15)
        assert cosine(4.0 * u, 0.5 * v) == pytest.approx(cosine(u, v), abs = 1e-12)

    def test_zero_vector(self):
        with pytest.raises(UndefinedCosineError):
            cosine([0.0, 0.0], [1.0, 0.0])


class TestSpearman:
    def test_monotone(self):
        xs = [0.5, 2.0, 1.0, 3.5, 0.1]
        assert spearman(xs, [x**2 for x in xs]) == pytest.approx(1.0, abs = 1e-12)

    def test_reversed(self):
        assert spearman([1, 2, 3, 4, 5], [5, 4, 3, 2, 1]) == pytest.approx(-1.0, abs = 1e-12)

    def test_ties(self):
        xs, ys = [1, 2, 2, 4], [1, 3, 2, 4]
        assert abs(spearman(xs, ys) - brute_force_spearman(xs, ys)) < 1e-12

    def test_matches_brute_force_on_tie_rich_lists(self):
        rng = np.random.default_rng(42)
        checked = 0
        for _ in range(1000):
            size = int(rng.integers(2, 51))
            xs = rng.integers(0, 6, size = size).tolist()
            ys = rng.integers(0, 6, size = size).tolist()
            if len(set(xs)) == 1 or len(set(ys)) == 1:
                with pytest.raises(UndefinedCorrelationError):
                    spearman(xs, ys)
                continue
            assert abs(spearman(xs, ys) - brute_force_spearman(xs, ys)) < 1e-12
            checked += 1
        assert checked > 900

    def test_invariances(self):
        rng = np.random.default_rng(3)
        xs = rng.normal(size = 30)
        ys = rng.normal(size = 30)
        base = spearman(xs, ys)
        assert spearman(np.exp(xs), ys) == base
        assert spearman(xs, 3.0 * ys + 1.0) == base
        assert spearman(ys, xs) == pytest.approx(base, abs = 1e-15)
        assert spearman(xs, -ys) == pytest.approx(-base, abs = 1e-15)

    def test_constant(self):
        with pytest.raises(UndefinedCorrelationError):
            spearman([1, 2, 3], [4, 4, 4])

    @pytest.mark.parametrize(("xs", "ys"), [([1.0], [2.0]), ([1.0, 2.0], [1.0, 2.0, 3.0])])
    def test_bad_lengths(self, xs, ys):
        with pytest.raises(ContractError):
            spearman(xs, ys)


class TestEvaluate:
    def test_perfect_agreement(self):
        entry = evaluate(fan_table(8), fan_dataset(8))
        assert entry.rho_scaled == pytest.approx(100.0)
        assert entry.pairs_scored == entry.pairs_total == 7

    def test_perfect_disagreement(self):
        entry = evaluate(fan_table(8), fan_dataset(8, reverse = True))
        assert entry.rho_scaled == pytest.approx(-100.0)

    def test_oov_pairs_skipped(self, caplog):
        pairs = fan_dataset(6).pairs + (("w0", "ghost", 3.0), ("ghost", "w2", 1.0))
        with caplog.at_level(logging.WARNING):
            entry = evaluate(fan_table(6), SimilarityDataset("fan", pairs))
        assert entry.pairs_total == 7
        assert entry.pairs_scored == 5
        assert entry.skipped == 2
        assert entry.rho_scaled == pytest.approx(100.0)
        assert "skipped 2 of 7" in caplog.text

    def test_coverage(self):
        dataset = SimilarityDataset("d", (("w0", "w1", 1.0), ("x", "y", 2.0), ("w1", "z", 0.0)))
        with pytest.raises(CoverageError):
            evaluate(fan_table(3), dataset)

    def test_scale_invariant(self):
        rng = np.random.default_rng(0)
        words = [f"w{i}" for i in range(20)]
        table = EmbeddingTable("t", words, rng.normal(size = (20, 5)))
        scaled = EmbeddingTable("t", words, 7.5 * table.matrix)
        pairs = tuple(
            (f"w{i}", f"w{j}", float(rng.uniform()))
            for i in range(20) for j in range(i + 1, 20) if (i + j) % 3 == 0
        )
        dataset = SimilarityDataset("d", pairs)
        assert evaluate(scaled, dataset).rho_scaled == pytest.approx(
            evaluate(table, dataset).rho_scaled,
            abs = 1e-9,
        )

    def test_model_needs_aligned_set(self, aligned):
        model = train_ae(MetaMethod.CAEME, aligned, "mse", TrainConfig(hidden_dim = 8, epochs = 1))
        words = aligned.shared_vocab
        pairs = tuple((words[i], words[i + 1], float(i)) for i in range(10))
        dataset = SimilarityDataset("d", pairs)
        with pytest.raises(ContractError):
            evaluate(model, dataset)
        assert -100.0 <= evaluate(model, dataset, aligned).rho_scaled <= 100.0


class TestReport:
    def make_report(self):
        report = EvalReport()
        report.add("caeme-scp", "rg", EvalEntry("rg", 86.0, 65, 65))
        report.add("caeme-scp", "simlex", EvalEntry("simlex", 40.5, 999, 990))
        report.add("aaeme-mse", "rg", EvalEntry("rg", 80.123, 65, 60))
        report.add("aaeme-mse", "simlex", "error: broken")
        return report

    def test_render_plain(self):
        lines = self.make_report().render().splitlines()
        assert lines[0].split() == ["method", "rg", "simlex"]
        assert lines[1].split() == ["caeme-scp", "86.00", "40.50"]
        assert lines[2].split() == ["aaeme-mse", "80.12", "error"]

    def test_render_with_reference(self):
        text = self.make_report().render(load_reference())
        assert "86.00 (+0.59)" in text
        assert "40.50 (-4.35)" in text
        assert "80.12 (n/a)" in text

    def test_missing_cell(self):
        report = self.make_report()
        report.add("conc", "rg", EvalEntry("rg", 81.0, 65, 65))
        assert report.render().splitlines()[3].split() == ["conc", "81.00", "-"]

    def test_failures(self):
        assert self.make_report().failures == [("aaeme-mse", "simlex", "error: broken")]

    def test_score_records_errors(self):
        report = EvalReport()
        dataset = SimilarityDataset("d", (("x", "y", 1.0), ("y", "z", 2.0)))
        report.score("fan", fan_table(3), dataset)
        assert report.failures[0][:2] == ("fan", "d")
        assert report.failures[0][2].startswith("error: ")

    def test_write(self, tmp_path):
        text_path, json_path = self.make_report().write(tmp_path / "out", load_reference())
        assert text_path.read_text().startswith("method")
        records = [json.loads(line) for line in json_path.read_text().splitlines()]
        assert len(records) == 4
        assert records[0] == {
            "method": "caeme-scp",
            "dataset": "rg",
            "rho_scaled": 86.0,
            "pairs_total": 65,
            "pairs_scored": 65,
            "reference": 85.41,
            "delta": 0.59,
        }
        assert records[2]["reference"] is None
        assert records[3] == {
            "method": "aaeme-mse",
            "dataset": "simlex",
            "error": "error: broken",
        }


def noisy_views(seed, words = 200, latent = 10, dim = 20, noise = 1.0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size = (words, latent))
    z /= np.linalg.norm(z, axis = 1, keepdims = True)
    vocab = [f"w{i}" for i in range(words)]
    tables = []
    for k in range(3):
        basis, _ = np.linalg.qr(rng.normal(size = (dim, latent)))
        view = z @ basis.T + noise * rng.normal(size = (words, dim)) / np.sqrt(dim)
        tables.append(EmbeddingTable(f"view{k}", vocab, view))

    index = rng.choice(words, size = (400, 2))
    seen = set()
    pairs = []
    for a, b in index:
        key = frozenset((int(a), int(b)))
        if a == b or key in seen:
            continue
        seen.add(key)
        pairs.append((vocab[a], vocab[b], float(z[a] @ z[b])))
    return tables, SimilarityDataset("latent", tuple(pairs))


def test_meta_embedding_beats_noisy_sources():
    wins = 0
    for seed in range(5):
        tables, dataset = noisy_views(seed)
        aligned: AlignedEmbeddingSet = l2_normalize(align(tables))
        model = train_ae(MetaMethod.CAEME, aligned, LossKind.SCP, TrainConfig(seed = seed))
        meta = evaluate(model, dataset, aligned).rho_scaled
        best_source = max(evaluate(source, dataset).rho_scaled for source in aligned.sources)
        wins += meta >= best_source
    assert wins >= 3
