import csv
import io

import numpy as np
import pytest

from finres import __version__
from finres.cli import main
from finres.config import RunConfig, parse_config, validate_settings, with_overrides
from finres.demo import write_demo
from finres.errors import DataIOError, ValidationError
from finres.pipeline import LOCK, MANIFEST, Manifest, Pipeline
from finres.plotdata import plot_data

FAST = ["--draws", "80", "--burn-in", "20"]


@pytest.fixture(scope="module")
def demo(tmp_path_factory):
    return write_demo(tmp_path_factory.mktemp("demo"), months=60)


@pytest.fixture(scope="module")
def pipeline_out(demo, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "out"
    assert main(["pipeline", "--config", str(demo), "--out", str(out), *FAST]) == 0
    return out


def data_lines(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


# ---- config -------------------------------------------------------------------------

def test_parse_config_types_and_lists():
    cfg = parse_config("markets = A, B\nshock = S\ntotal = no\ndraws = 50\n# c\nvolatility = time\n", "/d")
    assert cfg.markets == ("A", "B") and cfg.total is False and cfg.draws == 50 and cfg.volatility == "time"
    assert cfg.base_dir == "/d"


def test_config_errors():
    with pytest.raises(ValidationError, match="unknown"):
        parse_config("colour = red\n")
    with pytest.raises(ValidationError):
        parse_config("draws = many\n")
    with pytest.raises(ValidationError):
        validate_settings(RunConfig(markets=("A",), shock="S", input="x", volatility="loud"))
    with pytest.raises(ValidationError):
        validate_settings(RunConfig(markets=("A",), shock="S", input="x", draws=10, burn_in=10))


def test_hash_ignores_output_location_but_not_seed():
    cfg = parse_config("markets = A\nshock = S\ninput = a.csv\n")
    assert with_overrides(cfg, out="elsewhere", threads=4, seed=None).config_hash() == cfg.config_hash()
    assert with_overrides(cfg, seed=1).config_hash() != cfg.config_hash()


def test_flags_override_config_file(demo, tmp_path):
    out = tmp_path / "x"
    assert main(["describe", "--config", str(demo), "--out", str(out), "--seed", "5"]) == 0
    first = (out / "tables" / "describe.csv").read_text().splitlines()[0]
    expected = with_overrides(parse_config(demo.read_text()), seed=5).config_hash()
    assert first == f"# config_hash={expected} finres {__version__}"


# ---- describe ---------------------------------------------------------------------

def test_describe_to_stdout_is_deterministic(demo, capsys):
    assert main(["describe", "--config", str(demo), "--output", "-"]) == 0
    one = capsys.readouterr().out
    assert main(["describe", "--config", str(demo), "--output", "-"]) == 0
    assert capsys.readouterr().out == one
    rows = list(csv.reader(ln for ln in one.splitlines() if not ln.startswith("#")))
    names = [r[0] for r in rows[1:]]
    assert {"Shock", "MarketA", "CPU", "Sentiment"} <= set(names)


def test_missing_column_fails_before_compute(demo, tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(demo.read_text().replace("MarketC", "MarketZ").replace("input = demo.csv",
                                                                          f"input = {demo.parent / 'demo.csv'}"))
    out = tmp_path / "out"
    assert main(["pipeline", "--config", str(bad), "--out", str(out)]) == 2
    assert "MarketZ" in capsys.readouterr().err
    assert not (out / "posterior").exists()


def test_bad_range_flag_is_validation_error(demo, tmp_path):
    assert main(["estimate", "--config", str(demo), "--out", str(tmp_path / "o"), "--lags", "0"]) == 2


def test_missing_input_is_io_error(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("input = nowhere.csv\nmarkets = A\nshock = S\n")
    assert main(["describe", "--config", str(cfg)]) == 4


def test_lock_file_blocks_second_run(demo, tmp_path, capsys):
    out = tmp_path / "locked"
    out.mkdir()
    (out / LOCK).write_text("999\n")
    assert main(["describe", "--config", str(demo), "--out", str(out)]) == 4
    assert "lock" in capsys.readouterr().err


# ---- pipeline ---------------------------------------------------------------------

def test_pipeline_manifest_lists_artifacts(pipeline_out):
    man = Manifest.parse((pipeline_out / MANIFEST).read_text())
    assert man.failed is None
    assert len(man.entries) >= 5
    stages = {stage for _, stage, _ in man.entries}
    assert stages == {"preprocess", "estimate", "irf", "resilience", "connect", "mediate"}
    for rel, _, sha in man.entries:
        assert (pipeline_out / rel).is_file()
    assert not (pipeline_out / LOCK).exists()


def test_every_output_has_provenance_line(pipeline_out):
    man = Manifest.parse((pipeline_out / MANIFEST).read_text())
    for rel, _, _ in man.entries:
        head = (pipeline_out / rel).read_bytes()[:200]
        if rel.endswith(".fpost"):
            head = head.split(b"\n", 1)[1]
        assert head.startswith(f"# config_hash={man.config_hash} finres {__version__}".encode()), rel


def test_stage_subcommands_reuse_earlier_outputs(pipeline_out, demo):
    before = (pipeline_out / "resilience" / "resilience.csv").read_bytes()
    assert main(["resilience", "--config", str(demo), "--out", str(pipeline_out), *FAST]) == 0
    assert (pipeline_out / "resilience" / "resilience.csv").read_bytes() == before


def test_failed_stage_leaves_marker(demo, tmp_path):
    out = tmp_path / "fail"
    cfg = with_overrides(parse_config(demo.read_text(), str(demo.parent)), out=str(out), draws=80, burn_in=20)
    pipe = Pipeline(cfg)
    pipe.run_stages(["preprocess", "estimate"], manifest=True)
    (out / "posterior" / "MarketB.fpost").write_bytes(b"garbage")
    with pytest.raises(ValidationError) as err:
        Pipeline(cfg).run_stages(["irf"], manifest=True)
    assert err.value.stage == "irf"
    man = Manifest.parse((out / MANIFEST).read_text())
    assert man.failed[0] == "irf"
    assert (out / "irf" / "MarketA.csv").exists()  # partial output kept
    assert not (out / LOCK).exists()


# ---- plotdata ---------------------------------------------------------------------

def test_plotdata_irf_from_archive_row_count(pipeline_out):
    post = pipeline_out / "posterior" / "MarketA.fpost"
    buf = io.StringIO()
    n = plot_data(post, "irf", buf, horizon_N=12)
    from finres.tvpvar import load_posterior

    T = len(load_posterior(post).dates)
    assert n == T * 12 * 4
    assert len(data_lines_from(buf)) == n + 1


def data_lines_from(buf):
    return [ln for ln in buf.getvalue().splitlines() if not ln.startswith("#")]


def test_plotdata_resilience_schema(pipeline_out, tmp_path, demo):
    dest = tmp_path / "r.csv"
    assert main(["plotdata", str(pipeline_out / "resilience" / "resilience.csv"), "--kind", "resilience",
                 "--output", str(dest), "--config", str(demo)]) == 0
    assert data_lines(dest)[0] == "date,market,shock,intensity,duration,degenerate"


def test_plotdata_npdc_canonical(tmp_path):
    src = tmp_path / "n.csv"
    src.write_text("date,from,to,npdc\n2000-01,A,B,5.0\n2000-01,B,A,-5.0\n2000-02,B,A,2.5\n2000-02,A,A,0\n")
    buf = io.StringIO()
    assert plot_data(src, "npdc", buf) == 2
    rows = data_lines_from(buf)
    assert rows == ["date,from,to,npdc", "2000-01,A,B,5.0", "2000-02,A,B,-2.5"]


def test_plotdata_npdc_from_pipeline(pipeline_out):
    buf = io.StringIO()
    n = plot_data(pipeline_out / "connect" / "markets_intensity_npdc.csv", "npdc", buf)
    rows = list(csv.reader(data_lines_from(buf)))[1:]
    assert len(rows) == n and len({(r[0], r[1], r[2]) for r in rows}) == n
    order = ["MarketA", "MarketB", "MarketC", "Total"]
    assert all(order.index(r[1]) < order.index(r[2]) for r in rows)


def test_plotdata_errors(pipeline_out, tmp_path):
    with pytest.raises(ValidationError, match="unknown plot kind"):
        plot_data(pipeline_out / MANIFEST, "bars", io.StringIO())
    with pytest.raises(DataIOError):
        plot_data(tmp_path / "none.csv", "npdc", io.StringIO())
    with pytest.raises(ValidationError):
        plot_data(pipeline_out / "resilience" / "resilience.csv", "dynamic", io.StringIO())
    assert main(["plotdata", str(pipeline_out / "tables" / "describe.csv"), "--kind", "npdc"]) == 2


def test_threads_do_not_change_results(demo, tmp_path):
    outs = []
    for t in ("1", "3"):
        out = tmp_path / f"t{t}"
        assert main(["estimate", "--config", str(demo), "--out", str(out), "--threads", t, *FAST]) == 0
        outs.append(out)
    for name in ("MarketA", "MarketB", "MarketC", "Total"):
        a, b = (np.frombuffer((o / "posterior" / f"{name}.fpost").read_bytes(), np.uint8) for o in outs)
        assert np.array_equal(a, b)
