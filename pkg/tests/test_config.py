import pytest

from lattice_cnn.config import RunConfig
from lattice_cnn.errors import ConfigError


def write(tmp_path, text, files=("train.tsv", "vocab.txt")):
    for f in files:
        (tmp_path / f).write_text("")
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


def test_defaults_and_derived(tmp_path):
    cfg = RunConfig.load(write(tmp_path, "vocab_path = vocab.txt\ntrain_path = train.tsv\n"))
    assert cfg.resolve(cfg.train_path) == tmp_path / "train.tsv"
    m = cfg.model_config()
    assert (m.embedding_dim, m.hidden_size, m.use_indicators) == (300, 1024, True)
    assert m.encoder.kernels == (256, 512, 256) and m.encoder.pooling == "gated"
    t = cfg.train_config()
    assert (t.batch_size, t.lr, t.rho, t.neg_per_question) == (64, 1.0, 0.95, 10)


def test_kbre_defaults(tmp_path):
    cfg = RunConfig.load(write(tmp_path, "task_style = kbre\nvocab_path = vocab.txt\n"))
    assert not cfg.use_indicators
    assert cfg.train_config().neg_per_question == 5


def test_parsing(tmp_path):
    text = """
    # comment
    vocab_path = vocab.txt
    widths = 1, 3
    kernels = 4,5
    residual = no
    indicators = yes
    dropout = 0.25
    n_layers = 2
    """
    cfg = RunConfig.load(write(tmp_path, text))
    assert cfg.widths == (1, 3) and cfg.kernels == (4, 5)
    assert cfg.residual is False and cfg.indicators is True
    assert cfg.dropout == 0.25 and cfg.n_layers == 2


def test_all_problems_collected(tmp_path):
    text = "bogus = 1\npooling = min\nbatch_size = x\nno equals sign\ntrain_path = missing.tsv\n"
    with pytest.raises(ConfigError) as info:
        RunConfig.load(write(tmp_path, text, files=()))
    msgs = "\n".join(info.value.problems)
    for needle in ("unknown key 'bogus'", "pooling", "batch_size", "line 4", "missing.tsv",
                   "vocab_path is required"):
        assert needle in msgs


def test_word_seq_needs_segs(tmp_path):
    with pytest.raises(ConfigError, match="seg_paths"):
        RunConfig.load(write(tmp_path, "input_mode = word_seq\n"))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        RunConfig.load(tmp_path / "absent.cfg")
