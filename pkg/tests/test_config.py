# SPDX-License-Identifier: LGPL-3.0-only

import pathlib

import pytest

from metaemb import ArtifactError, ContractError, LossKind, MetaMethod, TableFormat
from metaemb.config import (
    ALL_LOSSES,
    ALL_METHODS,
    DatasetSpec,
    MethodRequest,
    RunConfig,
    SourceSpec,
    load_run_config,
    parse_dataset,
    parse_source,
)

EXAMPLE = pathlib.Path(__file__).parents[1] / "example" / "run.cfg"


def requests(config):
    return { request.method: request for request in config.methods }


class TestParseSpecs:
    def test_named_source(self):
        expected = SourceSpec("glove", pathlib.Path("data/glove.txt"))
        assert parse_source("glove=data/glove.txt") == expected

    def test_bare_source(self):
        assert parse_source("data/hdc.vec").name == "hdc"

    def test_dataset_delimiter_from_suffix(self):
        assert parse_dataset("rg=rg.csv").delimiter == ","
        expected = DatasetSpec("simlex", pathlib.Path("simlex.tsv"), "\t")
        assert parse_dataset("simlex.tsv") == expected


class TestDefaults:
    def test_empty(self):
        config = load_run_config()
        assert config.sources == ()
        assert [request.method for request in config.methods] == list(ALL_METHODS)
        assert all(request.losses == (LossKind.MSE,) for request in config.methods)
        assert config.train.hidden_dim == 200
        assert config.train.learning_rate is None
        assert config.workers == 1
        assert config.out == pathlib.Path("out")

    def test_reproduce_defaults(self):
        config = load_run_config(default_losses = ALL_LOSSES)
        assert requests(config)[MetaMethod.CAEME].losses == ALL_LOSSES

    def test_all_methods_excludes_derived_variant(self):
        assert MetaMethod.TAE_PLUS_Y not in ALL_METHODS
        assert MethodRequest(MetaMethod.TAE, concat_y = True).resolved is MetaMethod.TAE_PLUS_Y
        assert MethodRequest(MetaMethod.MTE, concat_y = True).resolved is MetaMethod.MTE


class TestRunFile:
    def test_example(self):
        config = load_run_config(EXAMPLE)
        assert [source.name for source in config.sources] == [
            "skipgram",
            "fasttext",
            "glove",
            "lexvec",
            "hpca",
            "hdc",
        ]
        assert config.sources[2].format is TableFormat.PLAIN
        assert config.sources[0].path == EXAMPLE.parent / "embeddings" / "skipgram.txt"
        assert len(config.datasets) == 6
        assert config.workers == 4

        by_method = requests(config)
        assert set(by_method) == set(ALL_METHODS)
        assert by_method[MetaMethod.CAEME].losses == ALL_LOSSES
        assert by_method[MetaMethod.TAE].losses == (LossKind.MSE,)
        assert by_method[MetaMethod.SVD].rank == 200

    def test_precedence(self, write_text):
        path = write_text(
            "run.cfg",
            "[run]\nloss = mse\nepochs = 7\n\n[method:caeme]\nloss = kl, scp\n\n[method:av]\n",
        )
        config = load_run_config(path)
        by_method = requests(config)
        assert list(by_method) == [MetaMethod.CAEME, MetaMethod.AV]
        assert by_method[MetaMethod.CAEME].losses == (LossKind.KL, LossKind.SCP)
        assert by_method[MetaMethod.AV].losses == (LossKind.MSE,)
        assert config.train.epochs == 7

        flagged = load_run_config(path, { "loss": (LossKind.MAE,), "epochs": 3, "lr": None })
        assert requests(flagged)[MetaMethod.CAEME].losses == (LossKind.MAE,)
        assert flagged.train.epochs == 3

    def test_train_settings(self, write_text):
        path = write_text(
            "run.cfg",
            "[run]\nseed = 5\nbatch = 8\nhidden = 16\ndropout = 0\nlr = 0.25\n"
            "init_std = 0.5\ninit_scaled = yes\nmethods = tae\ntarget = glove, 2\n"
            "concat_y = true\n",
        )
        config = load_run_config(path)
        train = config.train
        assert (train.seed, train.shuffle_seed, train.batch_size) == (5, 5, 8)
        assert (train.hidden_dim, train.dropout_rate, train.learning_rate) == (16, 0.0, 0.25)
        assert train.init_std == 0.5
        assert train.init_scaled
        request = config.methods[0]
        assert request.targets == ("glove", "2")
        assert request.resolved is MetaMethod.TAE_PLUS_Y

    def test_dataset_delimiter(self, write_text):
        path = write_text("run.cfg", "[dataset:men]\npath = men.csv\ndelimiter = comma\n")
        assert load_run_config(path).datasets[0].delimiter == ","

    def test_flag_sources_replace_file_sources(self, write_text):
        path = write_text("run.cfg", "[source:a]\npath = a.txt\n")
        config = load_run_config(path, { "sources": [parse_source("b=b.txt")] })
        assert config.source_names == ["b"]

    @pytest.mark.parametrize(
        "text",
        [
            "[run]\nbogus = 1\n",
            "[elsewhere]\nx = 1\n",
            "[method:nope]\n",
            "[method:svd]\nepochs = 3\n",
            "[source:a]\nformat = plain\n",
            "[source:a]\npath = a.txt\nformat = binary\n",
            "[run]\ninit_scaled = maybe\n",
            "[run]\nepochs = many\n",
            "[run]\nloss = hinge\n",
            "[run]\ndropout = 1.5\n",
            "[run]\nworkers = 0\n",
            "[source:a]\npath = a.txt\n[source:a]\npath = b.txt\n",
        ],
    )
    def test_invalid(self, write_text, text):
        with pytest.raises(ContractError):
            load_run_config(write_text("run.cfg", text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactError):
            load_run_config(tmp_path / "absent.cfg")


class TestRunConfig:
    def test_unique_source_names(self):
        with pytest.raises(ContractError):
            RunConfig(
                sources = (SourceSpec("a", pathlib.Path("x")), SourceSpec("a", pathlib.Path("y"))),
            )

    def test_path_is_output_directory(self, tmp_path):
        with pytest.raises(ContractError):
            RunConfig(datasets = (DatasetSpec("d", tmp_path),), out = tmp_path)
