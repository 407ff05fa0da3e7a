import pytest
from hypothesis import given, settings, strategies as st

from canita.config import RunConfig, build_objective, load_dataset, parse_synthetic, resolve_compressor
from canita.errors import ConfigurationError


def test_defaults():
    c = RunConfig()
    assert c.n == 20 and c.algo == "canita" and c.charge_both and c.h0 == "zero"


def test_round_trip_default_and_custom():
    for c in (RunConfig(), RunConfig(dataset="libsvm:/data/a9a", n=7, algo="diana", compressor="quant:sqrt", T=12,
                                     seeds=(3, 1, 2), stepsize=0.125, alpha=0.5, log_interval=4, h0="grad",
                                     charge_both=False, normalize=True, partition="shuffled", partition_seed=9,
                                     ref_steps=10, output="out", format="jsonl", thresholds=(0.4, 0.05))):
        assert RunConfig.from_text(c.to_text()) == c


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 500), T=st.integers(0, 10 ** 6), seeds=st.lists(st.integers(0, 2 ** 31), min_size=1, max_size=5),
       stepsize=st.one_of(st.none(), st.floats(1e-9, 1e3)), thresholds=st.lists(st.floats(1e-12, 10), max_size=4),
       charge=st.booleans(), algo=st.sampled_from(["canita", "diana", "qsgd"]))
def test_round_trip_property(n, T, seeds, stepsize, thresholds, charge, algo):
    c = RunConfig(n=n, T=T, seeds=tuple(seeds), stepsize=stepsize, thresholds=tuple(thresholds),
                  charge_both=charge, algo=algo)
    assert RunConfig.from_text(c.to_text()) == c
    assert RunConfig.from_text(c.to_text()).digest() == c.digest()


def test_text_format_comments_and_errors():
    c = RunConfig.from_text("# comment\nn = 5  # machines\n\nseeds = 1,2\n")
    assert c.n == 5 and c.seeds == (1, 2)
    with pytest.raises(ConfigurationError):
        RunConfig.from_text("n 5\n")
    with pytest.raises(ConfigurationError):
        RunConfig.from_text("machines = 5\n")
    with pytest.raises(ConfigurationError):
        RunConfig.from_text("n = five\n")
    with pytest.raises(ConfigurationError):
        RunConfig.from_text("charge_both = maybe\n")


@pytest.mark.parametrize("kwargs", [dict(T=-1), dict(seeds=()), dict(n=0), dict(format="xml"), dict(h0="ones")])
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigurationError):
        RunConfig(**kwargs)


def test_digest_changes_with_content():
    assert RunConfig().digest() != RunConfig(T=1001).digest()


def test_dataset_builders(tmp_path):
    assert parse_synthetic("d=3,rows=9,noise=0.2")["noise"] == 0.2
    with pytest.raises(ConfigurationError):
        parse_synthetic("dims=3")
    obj = build_objective(RunConfig(dataset="synthetic:d=6,rows=30", n=4))
    assert obj.n == 4 and obj.d == 6
    assert resolve_compressor(RunConfig(compressor="randk:d/3"), 6).k == 2
    p = tmp_path / "x.svm"
    p.write_text("+1 1:1 2:0.5\n-1 2:1\n+1 3:2\n")
    ds = load_dataset(RunConfig(dataset=f"libsvm:{p}", normalize=True))
    assert ds.d == 3 and len(ds) == 3
    with pytest.raises(ConfigurationError):
        load_dataset(RunConfig(dataset="http://example.com/a9a"))
    empty = tmp_path / "empty.svm"
    empty.write_text("")
    with pytest.raises(ConfigurationError):
        load_dataset(RunConfig(dataset=f"libsvm:{empty}"))


def test_conditioned_synthetic_scales_columns():
    ds = load_dataset(RunConfig(dataset="synthetic:d=5,rows=2000,cond=100"))
    spread = ds.X.toarray().std(axis=0)
    assert spread[0] / spread[-1] == pytest.approx(100, rel=0.2)
